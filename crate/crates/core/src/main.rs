use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hyperpmg::harness::{
    read_config, run_accuracy_study, run_performance_study, run_solve, run_verify, HarnessError, ProblemConfig,
    RunOptions,
};

#[derive(Parser)]
#[command(name = "hyperpmg", version, about = "Matrix-free hyperelasticity with p-multigrid")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration file
    #[arg(long)]
    config: PathBuf,
    /// Directory for CSV, log and VTK output
    #[arg(long, default_value = "output")]
    output: PathBuf,
    /// Worker threads; overrides the `threads` key (0 = all cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Write zeros in timing columns so outputs compare byte for byte
    #[arg(long)]
    deterministic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configured problem
    Solve(Common),
    /// Energy error against a reference across orders and refinements
    StudyAccuracy(Common),
    /// Jacobian application throughput and storage
    StudyPerformance(Common),
    /// Run the invariant suite and print a pass/fail table
    Verify {
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long, hide = true, default_value_t = 0.0)]
        perturb_jacobian: f64,
    },
}

fn init_threads(n: usize) {
    if n > 0 {
        // fails only if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

/// Reads the config and honours its `threads` key unless the flag overrides it.
fn prepare(c: &Common) -> Result<String, HarnessError> {
    let text = read_config(&c.config)?;
    let threads = match c.threads {
        Some(t) => t,
        None => {
            let entries = hyperpmg::harness::config::parse_entries(&text)?;
            match entries.iter().rev().find(|e| e.key == "threads") {
                Some(e) => e.value.trim().parse().unwrap_or(0),
                None => 0,
            }
        }
    };
    init_threads(threads);
    Ok(text)
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Solve(c) => {
            let text = prepare(&c)?;
            let cfg = ProblemConfig::parse(&text)?;
            let out = run_solve(&cfg, &c.output, &RunOptions { deterministic: c.deterministic })?;
            println!(
                "converged dofs={} psi={:e} newton_its={} cg_its={}",
                out.dofs,
                out.psi,
                out.report.nonlinear_iterations(),
                out.report.linear_iterations()
            );
        }
        Command::StudyAccuracy(c) => {
            let text = prepare(&c)?;
            let rows = run_accuracy_study(&text, &c.output, &RunOptions { deterministic: c.deterministic })?;
            println!("wrote {} rows to {}", rows.len(), c.output.join("accuracy.csv").display());
        }
        Command::StudyPerformance(c) => {
            let text = prepare(&c)?;
            let rows = run_performance_study(&text, &c.output, &RunOptions { deterministic: c.deterministic })?;
            println!("wrote {} rows to {}", rows.len(), c.output.join("performance.csv").display());
        }
        Command::Verify { threads, perturb_jacobian } => {
            init_threads(threads.unwrap_or(0));
            let checks = run_verify(perturb_jacobian)?;
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed > 0 {
                println!("{failed} of {} checks failed", checks.len());
                return Err(HarnessError::Verification(failed));
            }
            println!("all {} checks passed", checks.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| writeln!(buf, "level={} {}", record.level().as_str().to_lowercase(), record.args()))
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
