use std::path::Path;
use std::process::{Command, Output};

const CONFIGS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs");

fn hyperpmg(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperpmg"))
        .args(args)
        .arg("--output")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("case.cfg");
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    let mut r = csv::Reader::from_path(path).unwrap();
    r.records().map(|x| x.unwrap()).collect()
}

#[test]
fn zero_traction_converges_immediately() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperpmg(&["solve", "--config", &format!("{CONFIGS}/zero_traction.cfg")], dir.path());
    assert!(out.status.success());
    let rows = csv_rows(&dir.path().join("summary.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(&rows[0][5], "0");
    assert_eq!(&rows[0][7], "0");
}

#[test]
fn bending_writes_energy_and_vtk() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperpmg(&["solve", "--config", &format!("{CONFIGS}/bending.cfg")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("summary.csv"));
    let psi: f64 = rows[0][5].parse().unwrap();
    assert!(psi.is_finite() && psi > 0.0);
    let vtk = std::fs::read_to_string(dir.path().join("solution.vtk")).unwrap();
    assert!(vtk.starts_with("# vtk DataFile Version"));
    assert!(vtk.contains("VECTORS displacement"));
    let log = std::fs::read_to_string(dir.path().join("iterations.log")).unwrap();
    assert!(log.lines().any(|l| l.contains("converged=true")));
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "order = 2\nyoungs = 3\n");
    let out = hyperpmg(&["solve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("youngs") && err.contains("line 2"), "{err}");
}

#[test]
fn bad_material_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "poisson = 0.5\n");
    let out = hyperpmg(&["solve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperpmg(&["solve", "--config", "/nonexistent/case.cfg"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn solver_failure_names_the_phase() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "counts = 4 1 1\nextents = 4 1 1\ntraction = 0 0 -0.01\nmax_iterations = 1\n");
    let out = hyperpmg(&["solve", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("during solve"));
}

#[test]
fn duplicate_accuracy_case_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "case = a 1 1\ncase = a 2 1\nreference = 3 1\n");
    let out = hyperpmg(&["study-accuracy", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duplicate"));
}

#[test]
fn p_refinement_column_decreases_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "extents = 4 1 1\ncounts = 4 1 1\ntraction = 0 0 -0.0005\n\
         case = p1 1 1\ncase = p2 2 1\ncase = p3 3 1\nreference = 4 3\n",
    );
    let out = hyperpmg(&["study-accuracy", "--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("accuracy.csv"));
    let errs: Vec<f64> = rows[1..].iter().map(|r| r[6].parse().unwrap()).collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn performance_study_reports_every_case() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyperpmg(&["study-performance", "--config", &format!("{CONFIGS}/performance.cfg")], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("performance.csv"));
    let ids: Vec<&str> = rows.iter().map(|r| &r[0]).collect();
    assert_eq!(
        ids,
        ["q1-mf", "q2-mf", "q3-mf", "q2-mf-native", "q2-mf-tuned", "q1-asm", "q2-asm", "q3-asm", "q2-asm-huge"]
    );
    let field = |id: &str, col: usize| -> f64 { rows.iter().find(|r| &r[0] == id).unwrap()[col].parse().unwrap() };
    // stored bytes per DoF fall with order for matrix-free
    assert!(field("q3-mf", 14) < field("q2-mf", 14) && field("q2-mf", 14) < field("q1-mf", 14));
    assert!(field("q2-asm", 10) > field("q1-asm", 10));
    assert!(rows.last().unwrap()[15].starts_with("failed"));
}

#[test]
fn verify_passes_and_catches_a_wrong_tangent() {
    let dir = tempfile::tempdir().unwrap();
    let run = |extra: &[&str]| {
        Command::new(env!("CARGO_BIN_EXE_hyperpmg")).arg("verify").args(extra).current_dir(dir.path()).output().unwrap()
    };
    let ok = run(&[]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let bad = run(&["--perturb-jacobian", "1e-3"]);
    assert_eq!(bad.status.code(), Some(1));
    let table = String::from_utf8_lossy(&bad.stdout);
    let fd_line = table.lines().find(|l| l.starts_with("jacobian vs residual fd")).unwrap();
    assert!(fd_line.ends_with("FAIL"));
}
