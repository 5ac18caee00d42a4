use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};

use super::config::{parse_entries, ConfigError, Entry, ProblemConfig};
use super::solve::{build_operator, solve_problem};
use super::{ensure_dir, write_rows, HarnessError, RunOptions};
use crate::linalg::{Diagonal, LinearOperator};
use crate::material::JacobianRepresentation;
use crate::operator::{assemble, HyperelasticOperator};
use crate::solver::cg_solve;

/// One CSV row shared by the solve summary and both studies.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub case_id: String,
    pub kind: String,
    pub order: usize,
    pub refinement: usize,
    pub dofs: usize,
    pub psi: Option<f64>,
    pub rel_error: Option<f64>,
    pub newton_its: Option<usize>,
    pub cg_its: Option<usize>,
    pub cond_max_estimate: Option<f64>,
    pub nnz_per_row: Option<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub dofs_per_second: Option<f64>,
    pub bytes_per_dof: Option<f64>,
    pub status: String,
}

impl StudyRow {
    pub const HEADER: [&'static str; 16] = [
        "case_id",
        "kind",
        "order",
        "refinement",
        "dofs",
        "psi",
        "rel_error",
        "newton_its",
        "cg_its",
        "cond_max_estimate",
        "nnz_per_row",
        "setup_seconds",
        "solve_seconds",
        "dofs_per_second",
        "bytes_per_dof",
        "status",
    ];

    /// Columns that hold wall-clock measurements.
    pub const TIMING_COLUMNS: [&'static str; 3] = ["setup_seconds", "solve_seconds", "dofs_per_second"];

    pub fn new(case_id: &str, kind: &str, order: usize, refinement: usize, dofs: usize) -> Self {
        StudyRow {
            case_id: case_id.to_string(),
            kind: kind.to_string(),
            order,
            refinement,
            dofs,
            psi: None,
            rel_error: None,
            newton_its: None,
            cg_its: None,
            cond_max_estimate: None,
            nnz_per_row: None,
            setup_seconds: 0.0,
            solve_seconds: 0.0,
            dofs_per_second: None,
            bytes_per_dof: None,
            status: "ok".into(),
        }
    }

    pub(crate) fn set_timing(&mut self, setup: f64, solve: f64, work: f64, opts: &RunOptions) {
        if opts.deterministic {
            self.setup_seconds = 0.0;
            self.solve_seconds = 0.0;
            self.dofs_per_second = Some(0.0);
        } else {
            self.setup_seconds = setup;
            self.solve_seconds = solve;
            self.dofs_per_second = Some(if solve > 0.0 { work / solve } else { 0.0 });
        }
    }

    pub fn fields(&self) -> Vec<String> {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.case_id.clone(),
            self.kind.clone(),
            self.order.to_string(),
            self.refinement.to_string(),
            self.dofs.to_string(),
            opt(&self.psi),
            opt(&self.rel_error),
            opt(&self.newton_its),
            opt(&self.cg_its),
            opt(&self.cond_max_estimate),
            opt(&self.nnz_per_row),
            self.setup_seconds.to_string(),
            self.solve_seconds.to_string(),
            opt(&self.dofs_per_second),
            opt(&self.bytes_per_dof),
            self.status.clone(),
        ]
    }
}

fn bad(e: &Entry, msg: impl Into<String>) -> ConfigError {
    ConfigError { line: Some(e.line), key: Some(e.key.clone()), message: msg.into() }
}

fn tokens(e: &Entry, min: usize, max: usize) -> Result<Vec<&str>, ConfigError> {
    let t: Vec<&str> = e.value.split_whitespace().collect();
    if t.len() < min || t.len() > max {
        return Err(bad(e, format!("expected {min}..={max} fields, got {}", t.len())));
    }
    Ok(t)
}

fn num<T: std::str::FromStr>(e: &Entry, s: &str) -> Result<T, ConfigError> {
    s.parse().map_err(|_| bad(e, format!("cannot parse '{s}'")))
}

fn check_unique(e: &Entry, id: &str, seen: &mut HashSet<String>) -> Result<(), ConfigError> {
    if !seen.insert(id.to_string()) {
        return Err(bad(e, format!("duplicate case id '{id}'")));
    }
    Ok(())
}

/// Accuracy study case: `case = id order refinement`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCase {
    pub id: String,
    pub order: usize,
    pub refinement: usize,
}

/// Parsed accuracy study: base problem, cases and the reference case.
pub fn parse_accuracy(text: &str) -> Result<(ProblemConfig, Vec<AccuracyCase>, AccuracyCase), ConfigError> {
    let entries = parse_entries(text)?;
    let (base, rest) = ProblemConfig::from_entries(&entries, &["case", "reference"])?;
    let mut cases = Vec::new();
    let mut reference = None;
    let mut seen = HashSet::new();
    for e in &rest {
        if e.key == "reference" {
            let t = tokens(e, 2, 2)?;
            reference = Some(AccuracyCase { id: "reference".into(), order: num(e, t[0])?, refinement: num(e, t[1])? });
        } else {
            let t = tokens(e, 3, 3)?;
            check_unique(e, t[0], &mut seen)?;
            let c = AccuracyCase { id: t[0].into(), order: num(e, t[1])?, refinement: num(e, t[2])? };
            if c.order == 0 || c.refinement == 0 {
                return Err(bad(e, "order and refinement must be positive"));
            }
            cases.push(c);
        }
    }
    let reference = reference.ok_or(ConfigError {
        line: None,
        key: Some("reference".into()),
        message: "accuracy study needs a reference case".into(),
    })?;
    if cases.is_empty() {
        return Err(ConfigError { line: None, key: Some("case".into()), message: "no cases listed".into() });
    }
    Ok((base, cases, reference))
}

fn case_config(base: &ProblemConfig, order: usize, refinement: usize, id: &str) -> ProblemConfig {
    let mut c = base.clone();
    c.order = order;
    c.counts = base.counts.map(|n| n * refinement);
    c.schedule = None;
    c.quadrature = None;
    c.name = id.to_string();
    c
}

/// Solves every case and the reference; writes `accuracy.csv`.
pub fn run_accuracy_study(text: &str, output: &Path, opts: &RunOptions) -> Result<Vec<StudyRow>, HarnessError> {
    let (base, cases, reference) = parse_accuracy(text)?;
    ensure_dir(output)?;
    let rcfg = case_config(&base, reference.order, reference.refinement, "reference");
    let (_, rout) = solve_problem(&rcfg)?;
    let psi_ref = rout.psi;
    info!("accuracy reference psi={psi_ref:e} dofs={}", rout.dofs);
    let mut rows = vec![{
        let mut r = rout.row("reference", reference.order, reference.refinement, opts);
        r.rel_error = Some(0.0);
        r
    }];
    for c in &cases {
        let cfg = case_config(&base, c.order, c.refinement, &c.id);
        match solve_problem(&cfg) {
            Ok((_, out)) => {
                let mut r = out.row(&c.id, c.order, c.refinement, opts);
                r.rel_error = Some(((out.psi - psi_ref) / psi_ref).abs());
                info!("accuracy case={} dofs={} rel_error={:e}", c.id, out.dofs, r.rel_error.unwrap());
                rows.push(r);
            }
            Err(e) => {
                warn!("accuracy case={} status=failed reason=\"{e}\"", c.id);
                let mut r = StudyRow::new(&c.id, "matrix-free", c.order, c.refinement, 0);
                r.status = format!("failed: {e}");
                rows.push(r);
            }
        }
    }
    write_rows(&output.join("accuracy.csv"), &rows)?;
    Ok(rows)
}

/// Operator representation measured by the performance study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    MatrixFree,
    Assembled,
}

/// Performance case: `case = id kind order nx ny nz [representation]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceCase {
    pub id: String,
    pub kind: OperatorKind,
    pub order: usize,
    pub counts: [usize; 3],
    pub representation: Option<JacobianRepresentation>,
}

pub struct PerformanceStudy {
    pub base: ProblemConfig,
    pub cases: Vec<PerformanceCase>,
    pub repetitions: usize,
    pub memory_limit_mb: f64,
}

pub fn parse_performance(text: &str) -> Result<PerformanceStudy, ConfigError> {
    let entries = parse_entries(text)?;
    let (base, rest) = ProblemConfig::from_entries(&entries, &["case", "repetitions", "memory_limit_mb"])?;
    let mut study = PerformanceStudy { base, cases: Vec::new(), repetitions: 10, memory_limit_mb: 4096.0 };
    let mut seen = HashSet::new();
    for e in &rest {
        match e.key.as_str() {
            "repetitions" => {
                study.repetitions = num(e, &e.value)?;
                if study.repetitions == 0 {
                    return Err(bad(e, "must be at least 1"));
                }
            }
            "memory_limit_mb" => study.memory_limit_mb = num(e, &e.value)?,
            _ => {
                let t = tokens(e, 6, 7)?;
                check_unique(e, t[0], &mut seen)?;
                let kind = match t[1] {
                    "matrix-free" => OperatorKind::MatrixFree,
                    "assembled" => OperatorKind::Assembled,
                    other => return Err(bad(e, format!("unknown operator kind '{other}'"))),
                };
                let representation = match t.get(6) {
                    Some(s) => Some(s.parse().map_err(|x: crate::Error| bad(e, x.to_string()))?),
                    None => None,
                };
                let c = PerformanceCase {
                    id: t[0].into(),
                    kind,
                    order: num(e, t[2])?,
                    counts: [num(e, t[3])?, num(e, t[4])?, num(e, t[5])?],
                    representation,
                };
                if c.order == 0 || c.counts.contains(&0) {
                    return Err(bad(e, "order and counts must be positive"));
                }
                study.cases.push(c);
            }
        }
    }
    if study.cases.is_empty() {
        return Err(ConfigError { line: None, key: Some("case".into()), message: "no cases listed".into() });
    }
    Ok(study)
}

/// Rough peak memory of one case, in bytes.
pub fn estimate_bytes(case: &PerformanceCase, scalars: usize) -> f64 {
    let p1 = (case.order + 1) as f64;
    let nelem = case.counts.iter().product::<usize>() as f64;
    let nodes: f64 = case.counts.iter().map(|n| (n * case.order + 1) as f64).product();
    let (nn, nq) = (p1.powi(3), p1.powi(3));
    let mut bytes = nelem * nq * scalars as f64 * 8.0 + nelem * nn * 8.0 + 3.0 * nodes * 8.0 * 12.0;
    if case.kind == OperatorKind::Assembled {
        // COO coordinates, plan, values, CSR
        let entries = nelem * 9.0 * nn * nn;
        bytes += entries * 40.0;
    }
    bytes
}

fn measure(
    case: &PerformanceCase,
    base: &ProblemConfig,
    repetitions: usize,
    opts: &RunOptions,
) -> crate::Result<StudyRow> {
    let mut cfg = base.clone();
    cfg.order = case.order;
    cfg.quadrature = None;
    cfg.extents = [0, 1, 2].map(|i| base.extents[i] / base.counts[i] as f64 * case.counts[i] as f64);
    cfg.counts = case.counts;
    if let Some(r) = case.representation {
        cfg.representation = r;
    }
    let kind = match case.kind {
        OperatorKind::MatrixFree => "matrix-free",
        OperatorKind::Assembled => "assembled",
    };
    let mut op: HyperelasticOperator = build_operator(&cfg)?;
    let n = op.num_dofs();
    let mut row = StudyRow::new(&case.id, kind, case.order, 1, n);

    // preload: a crude Jacobi-CG step from rest, discarded except as the
    // linearization point
    let t0 = Instant::now();
    let f = op.apply_residual(&vec![0.0; n])?;
    let jac = op.jacobian()?;
    let d = Diagonal(jac.diagonal().iter().map(|v| 1.0 / v).collect());
    let mut du = vec![0.0; n];
    let rhs: Vec<f64> = f.iter().map(|v| -v).collect();
    cg_solve(&jac, &d, &rhs, &mut du, 1e-1, 10)?;
    op.apply_residual(&du)?;
    let jac = op.jacobian()?;

    let x: Vec<f64> = (0..n).map(|i| ((i % 17) as f64 - 8.0) / 8.0).collect();
    let mut y = vec![0.0; n];
    let (setup, solve) = match case.kind {
        OperatorKind::MatrixFree => {
            let setup = t0.elapsed().as_secs_f64();
            jac.apply(&x, &mut y);
            let t1 = Instant::now();
            for _ in 0..repetitions {
                jac.apply(&x, &mut y);
            }
            row.bytes_per_dof = Some(jac.bytes_per_dof());
            (setup, t1.elapsed().as_secs_f64())
        }
        OperatorKind::Assembled => {
            let a = assemble(&jac)?;
            let setup = t0.elapsed().as_secs_f64();
            a.apply(&x, &mut y);
            let t1 = Instant::now();
            for _ in 0..repetitions {
                a.apply(&x, &mut y);
            }
            row.nnz_per_row = Some(a.nnz_per_row());
            row.bytes_per_dof = Some((a.bytes() + 2 * n * 8) as f64 / n as f64);
            (setup, t1.elapsed().as_secs_f64())
        }
    };
    row.set_timing(setup, solve, (n * repetitions) as f64, opts);
    Ok(row)
}

/// Times repeated Jacobian applies; writes `performance.csv`. Failed or
/// over-budget cases become rows with a `failed` status.
pub fn run_performance_study(text: &str, output: &Path, opts: &RunOptions) -> Result<Vec<StudyRow>, HarnessError> {
    let study = parse_performance(text)?;
    ensure_dir(output)?;
    let mut rows = Vec::new();
    for case in &study.cases {
        let rep = case.representation.unwrap_or(study.base.representation);
        let estimate = estimate_bytes(case, rep.scalars());
        let kind = if case.kind == OperatorKind::Assembled { "assembled" } else { "matrix-free" };
        let dofs = 3 * case.counts.iter().map(|n| n * case.order + 1).product::<usize>();
        if estimate > study.memory_limit_mb * 1024.0 * 1024.0 {
            warn!("performance case={} status=failed reason=memory estimate={:.0}MB", case.id, estimate / 1048576.0);
            let mut r = StudyRow::new(&case.id, kind, case.order, 1, dofs);
            r.status = format!("failed: estimated {:.0} MB exceeds memory limit", estimate / 1048576.0);
            rows.push(r);
            continue;
        }
        match measure(case, &study.base, study.repetitions, opts) {
            Ok(r) => {
                info!(
                    "performance case={} kind={} dofs={} dofs_per_second={:e}",
                    r.case_id,
                    r.kind,
                    r.dofs,
                    r.dofs_per_second.unwrap_or(0.0)
                );
                rows.push(r)
            }
            Err(e) => {
                warn!("performance case={} status=failed reason=\"{e}\"", case.id);
                let mut r = StudyRow::new(&case.id, kind, case.order, 1, dofs);
                r.status = format!("failed: {e}");
                rows.push(r);
            }
        }
    }
    write_rows(&output.join("performance.csv"), &rows)?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_cases_parse() {
        let (base, cases, r) = parse_accuracy("order = 1\ncase = a 1 1\ncase = b 2 2\nreference = 4 2\n").unwrap();
        assert_eq!(base.order, 1);
        assert_eq!(cases.len(), 2);
        assert_eq!((r.order, r.refinement), (4, 2));
        let e = parse_accuracy("case = a 1 1\ncase = a 2 1\nreference = 3 1").unwrap_err();
        assert!(e.message.contains("duplicate"));
        assert!(parse_accuracy("case = a 1 1").is_err());
        assert!(parse_accuracy("reference = 3 1").is_err());
        assert!(parse_accuracy("case = a 1\nreference = 3 1").is_err());
    }

    #[test]
    fn performance_cases_parse() {
        let s = parse_performance("repetitions = 3\ncase = q1 assembled 1 4 4 4\ncase = q2 matrix-free 2 2 2 2 initial-ad\n")
            .unwrap();
        assert_eq!(s.repetitions, 3);
        assert_eq!(s.cases[1].representation, Some(JacobianRepresentation::InitialAd));
        assert!(parse_performance("case = q1 dense 1 4 4 4").is_err());
        assert!(parse_performance("case = q1 assembled 1 4 4").is_err());
    }

    #[test]
    fn row_fields_match_header() {
        let r = StudyRow::new("x", "matrix-free", 2, 1, 81);
        assert_eq!(r.fields().len(), StudyRow::HEADER.len());
    }
}
