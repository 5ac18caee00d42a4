//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment. Every key has a default and
//! unknown keys are rejected. Only `case` may repeat.

use std::fmt;
use std::str::FromStr;

use crate::material::{JacobianRepresentation, NeoHookean};
use crate::mesh::{BoundaryCondition, Face};
use crate::solver::{LbfgsConfig, LineSearchKind, MultigridConfig, NewtonConfig, NonlinearSolver, Preconditioner};

/// Configuration error with the offending line, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: Option<String>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.key) {
            (Some(l), Some(k)) => write!(f, "line {l}, key '{k}': {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "key '{k}': {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

fn err(line: Option<usize>, key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError { line, key: Some(key.to_string()), message: message.into() }
}

/// One parsed `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Splits the text into entries, rejecting repeated keys other than `case`.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError { line: Some(line), key: None, message: format!("expected 'key = value', got '{content}'") });
        };
        let key = k.trim().to_string();
        if key.is_empty() {
            return Err(ConfigError { line: Some(line), key: None, message: "empty key".into() });
        }
        if key != "case" {
            if let Some(prev) = out.iter().find(|e| e.key == key) {
                return Err(err(Some(line), &key, format!("duplicate key (first set on line {})", prev.line)));
            }
        }
        out.push(Entry { line, key, value: v.trim().to_string() });
    }
    Ok(out)
}

fn parse_num<T: FromStr>(e: &Entry) -> Result<T, ConfigError> {
    e.value.parse().map_err(|_| err(Some(e.line), &e.key, format!("cannot parse '{}'", e.value)))
}

fn parse_list<T: FromStr>(e: &Entry, n: usize) -> Result<Vec<T>, ConfigError> {
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    if parts.len() != n {
        return Err(err(Some(e.line), &e.key, format!("expected {n} values, got {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| p.parse().map_err(|_| err(Some(e.line), &e.key, format!("cannot parse '{p}'"))))
        .collect()
}

fn parse_vec3(e: &Entry) -> Result<[f64; 3], ConfigError> {
    let v: Vec<f64> = parse_list(e, 3)?;
    Ok([v[0], v[1], v[2]])
}

fn parse_faces(e: &Entry) -> Result<Vec<Face>, ConfigError> {
    if e.value == "none" {
        return Ok(Vec::new());
    }
    e.value
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|x: crate::Error| err(Some(e.line), &e.key, x.to_string())))
        .collect()
}

/// `face:components` tokens such as `+x:yz`.
fn parse_rollers(e: &Entry) -> Result<Vec<(Face, [bool; 3])>, ConfigError> {
    if e.value == "none" {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for tok in e.value.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()) {
        let (f, comps) = tok
            .split_once(':')
            .ok_or_else(|| err(Some(e.line), &e.key, format!("expected face:components, got '{tok}'")))?;
        let face: Face = f.parse().map_err(|x: crate::Error| err(Some(e.line), &e.key, x.to_string()))?;
        let mut mask = [false; 3];
        for c in comps.chars() {
            match c {
                'x' => mask[0] = true,
                'y' => mask[1] = true,
                'z' => mask[2] = true,
                _ => return Err(err(Some(e.line), &e.key, format!("unknown component '{c}'"))),
            }
        }
        out.push((face, mask));
    }
    Ok(out)
}

/// Nonlinear solver family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    NewtonCg,
    Lbfgs,
}

/// Everything needed to set up and solve one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub name: String,
    pub extents: [f64; 3],
    pub counts: [usize; 3],
    pub order: usize,
    /// Gauss points per direction; `None` means `order + 1`.
    pub quadrature: Option<usize>,
    /// Geometry order; `None` means isoparametric.
    pub geometry_order: Option<usize>,
    pub young: f64,
    pub poisson: f64,
    /// Lamé parameters; override `young`/`poisson` when both are set.
    pub lame: Option<(f64, f64)>,
    pub representation: JacobianRepresentation,
    pub fixed: Vec<Face>,
    pub rollers: Vec<(Face, [bool; 3])>,
    pub displacement: Option<(Face, [f64; 3])>,
    pub traction: Option<(Face, [f64; 3])>,
    pub body_force: [f64; 3],
    pub solver: SolverKind,
    pub preconditioner: String,
    /// Explicit coarsening orders, finest first.
    pub schedule: Option<Vec<usize>>,
    pub smoothing_steps: usize,
    pub load_steps: usize,
    pub rtol: f64,
    pub atol: f64,
    pub linear_rtol: f64,
    pub max_iterations: usize,
    pub linear_max_iterations: usize,
    pub line_search: LineSearchKind,
    pub lbfgs_memory: usize,
    pub lbfgs_refresh: usize,
    pub threads: usize,
    pub write_vtk: bool,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let newton = NewtonConfig::default();
        let lbfgs = LbfgsConfig::default();
        ProblemConfig {
            name: "problem".into(),
            extents: [2.0, 1.0, 1.0],
            counts: [4, 2, 2],
            order: 2,
            quadrature: None,
            geometry_order: None,
            young: 1.0,
            poisson: 0.3,
            lame: None,
            representation: JacobianRepresentation::Current,
            fixed: vec![Face::NegX],
            rollers: Vec::new(),
            displacement: None,
            traction: None,
            body_force: [0.0; 3],
            solver: SolverKind::NewtonCg,
            preconditioner: "multigrid".into(),
            schedule: None,
            smoothing_steps: 1,
            load_steps: 1,
            rtol: newton.rtol,
            atol: newton.atol,
            linear_rtol: newton.linear_rtol,
            max_iterations: newton.max_iterations,
            linear_max_iterations: newton.linear_max_iterations,
            line_search: newton.line_search,
            lbfgs_memory: lbfgs.memory,
            lbfgs_refresh: lbfgs.refresh_interval,
            threads: 0,
            write_vtk: false,
        }
    }
}

/// Keys understood by [`ProblemConfig`].
pub const PROBLEM_KEYS: &[&str] = &[
    "name", "extents", "counts", "order", "quadrature", "geometry_order", "young", "poisson", "mu",
    "lambda", "representation", "fixed", "roller", "displacement_face", "displacement",
    "traction_face", "traction", "body_force", "solver", "preconditioner", "schedule",
    "smoothing_steps", "load_steps", "rtol", "atol", "linear_rtol", "max_iterations",
    "linear_max_iterations", "line_search", "lbfgs_memory", "lbfgs_refresh", "threads", "vtk",
];

impl ProblemConfig {
    /// Parses problem keys; entries whose key is in `extra` are returned
    /// untouched, anything else is an error.
    pub fn from_entries(entries: &[Entry], extra: &[&str]) -> Result<(Self, Vec<Entry>), ConfigError> {
        let mut c = ProblemConfig::default();
        let mut rest = Vec::new();
        let (mut mu, mut lambda) = (None, None);
        let (mut disp_face, mut disp) = (None, None);
        let mut traction_face = Face::PosX;
        let mut traction = None;
        for e in entries {
            let k = e.key.as_str();
            match k {
                "name" => c.name = e.value.clone(),
                "extents" => c.extents = parse_vec3(e)?,
                "counts" => {
                    let v: Vec<usize> = parse_list(e, 3)?;
                    c.counts = [v[0], v[1], v[2]];
                }
                "order" => c.order = parse_num(e)?,
                "quadrature" => c.quadrature = Some(parse_num(e)?),
                "geometry_order" => c.geometry_order = Some(parse_num(e)?),
                "young" => c.young = parse_num(e)?,
                "poisson" => c.poisson = parse_num(e)?,
                "mu" => mu = Some(parse_num::<f64>(e)?),
                "lambda" => lambda = Some(parse_num::<f64>(e)?),
                "representation" => {
                    c.representation = e.value.parse().map_err(|x: crate::Error| err(Some(e.line), k, x.to_string()))?
                }
                "fixed" => c.fixed = parse_faces(e)?,
                "roller" => c.rollers = parse_rollers(e)?,
                "displacement_face" => {
                    disp_face = Some(e.value.parse::<Face>().map_err(|x| err(Some(e.line), k, x.to_string()))?)
                }
                "displacement" => disp = Some(parse_vec3(e)?),
                "traction_face" => {
                    traction_face = e.value.parse().map_err(|x: crate::Error| err(Some(e.line), k, x.to_string()))?
                }
                "traction" => traction = Some(parse_vec3(e)?),
                "body_force" => c.body_force = parse_vec3(e)?,
                "solver" => {
                    c.solver = match e.value.as_str() {
                        "newton-cg" | "newton" => SolverKind::NewtonCg,
                        "lbfgs" => SolverKind::Lbfgs,
                        other => return Err(err(Some(e.line), k, format!("unknown solver '{other}'"))),
                    }
                }
                "preconditioner" => match e.value.as_str() {
                    "multigrid" | "jacobi" => c.preconditioner = e.value.clone(),
                    other => return Err(err(Some(e.line), k, format!("unknown preconditioner '{other}'"))),
                },
                "schedule" => {
                    c.schedule = if e.value == "auto" {
                        None
                    } else {
                        let n = e.value.split_whitespace().count();
                        Some(parse_list(e, n)?)
                    }
                }
                "smoothing_steps" => c.smoothing_steps = parse_num(e)?,
                "load_steps" => c.load_steps = parse_num(e)?,
                "rtol" => c.rtol = parse_num(e)?,
                "atol" => c.atol = parse_num(e)?,
                "linear_rtol" => c.linear_rtol = parse_num(e)?,
                "max_iterations" => c.max_iterations = parse_num(e)?,
                "linear_max_iterations" => c.linear_max_iterations = parse_num(e)?,
                "line_search" => {
                    c.line_search = match e.value.as_str() {
                        "critical-point" | "cp" => LineSearchKind::CriticalPoint,
                        "none" => LineSearchKind::None,
                        other => return Err(err(Some(e.line), k, format!("unknown line search '{other}'"))),
                    }
                }
                "lbfgs_memory" => c.lbfgs_memory = parse_num(e)?,
                "lbfgs_refresh" => c.lbfgs_refresh = parse_num(e)?,
                "threads" => c.threads = parse_num(e)?,
                "vtk" => c.write_vtk = parse_num(e)?,
                _ if extra.contains(&k) => rest.push(e.clone()),
                _ => return Err(err(Some(e.line), k, "unknown key")),
            }
        }
        match (mu, lambda) {
            (Some(m), Some(l)) => c.lame = Some((m, l)),
            (None, None) => {}
            _ => return Err(err(None, "mu", "mu and lambda must be given together")),
        }
        match (disp_face, disp) {
            (Some(f), Some(v)) => c.displacement = Some((f, v)),
            (None, None) => {}
            _ => return Err(err(None, "displacement", "displacement and displacement_face must be given together")),
        }
        c.traction = traction.map(|t| (traction_face, t));
        c.validate()?;
        Ok((c, rest))
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(Self::from_entries(&parse_entries(text)?, &[])?.0)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |k: &str, m: &str| Err(err(None, k, m));
        if self.counts.contains(&0) {
            return bad("counts", "element counts must be positive");
        }
        if self.extents.iter().any(|e| !(*e > 0.0)) {
            return bad("extents", "extents must be positive");
        }
        if self.order == 0 {
            return bad("order", "order must be at least 1");
        }
        if let Some(q) = self.quadrature {
            if q < self.order + 1 {
                return bad("quadrature", "need at least order + 1 points");
            }
        }
        if self.load_steps == 0 {
            return bad("load_steps", "must be at least 1");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0 && self.linear_rtol > 0.0) {
            return bad("rtol", "tolerances must be positive");
        }
        if self.lbfgs_refresh == 0 {
            return bad("lbfgs_refresh", "must be at least 1");
        }
        if self.smoothing_steps == 0 {
            return bad("smoothing_steps", "must be at least 1");
        }
        self.material().map_err(|e| err(None, "young", e.to_string()))?;
        Ok(())
    }

    pub fn material(&self) -> crate::Result<NeoHookean> {
        match self.lame {
            Some((mu, lambda)) => NeoHookean::new(mu, lambda),
            None => NeoHookean::from_young_poisson(self.young, self.poisson),
        }
    }

    pub fn boundary_conditions(&self) -> Vec<BoundaryCondition> {
        let mut bcs: Vec<BoundaryCondition> = self.fixed.iter().map(|f| BoundaryCondition::clamped(*f)).collect();
        for (face, components) in &self.rollers {
            bcs.push(BoundaryCondition::Dirichlet { face: *face, components: *components, value: [0.0; 3] });
        }
        if let Some((face, value)) = self.displacement {
            bcs.push(BoundaryCondition::Dirichlet { face, components: [true; 3], value });
        }
        if let Some((face, value)) = self.traction {
            bcs.push(BoundaryCondition::Traction { face, value });
        }
        bcs
    }

    pub fn multigrid(&self) -> MultigridConfig {
        MultigridConfig {
            schedule: self.schedule.clone(),
            pre_smooth: self.smoothing_steps,
            post_smooth: self.smoothing_steps,
        }
    }

    fn preconditioner_config(&self) -> Preconditioner {
        if self.preconditioner == "jacobi" {
            Preconditioner::Jacobi
        } else {
            Preconditioner::Multigrid(self.multigrid())
        }
    }

    pub fn nonlinear_solver(&self) -> NonlinearSolver {
        match self.solver {
            SolverKind::NewtonCg => NonlinearSolver::Newton(NewtonConfig {
                max_iterations: self.max_iterations,
                rtol: self.rtol,
                atol: self.atol,
                linear_rtol: self.linear_rtol,
                linear_max_iterations: self.linear_max_iterations,
                line_search: self.line_search,
                preconditioner: self.preconditioner_config(),
            }),
            SolverKind::Lbfgs => NonlinearSolver::Lbfgs(LbfgsConfig {
                memory: self.lbfgs_memory,
                max_iterations: self.max_iterations,
                rtol: self.rtol,
                atol: self.atol,
                refresh_interval: self.lbfgs_refresh,
                line_search: self.line_search,
                preconditioner: self.preconditioner_config(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = ProblemConfig::parse("").unwrap();
        assert_eq!(c, ProblemConfig::default());
        let c = ProblemConfig::parse(
            "# bar\norder = 3 # cubic\ncounts = 8 2 2\ntraction = 0 0 -0.1\nfixed = -x, -y\nroller = +x:yz\nsolver = lbfgs\nschedule = 3 1\n",
        )
        .unwrap();
        assert_eq!(c.order, 3);
        assert_eq!(c.counts, [8, 2, 2]);
        assert_eq!(c.traction, Some((Face::PosX, [0.0, 0.0, -0.1])));
        assert_eq!(c.fixed, vec![Face::NegX, Face::NegY]);
        assert_eq!(c.rollers, vec![(Face::PosX, [false, true, true])]);
        assert_eq!(c.solver, SolverKind::Lbfgs);
        assert_eq!(c.schedule, Some(vec![3, 1]));
        assert_eq!(c.boundary_conditions().len(), 4);
    }

    #[test]
    fn errors_name_line_and_key() {
        let e = ProblemConfig::parse("order = 2\nbogus = 1\n").unwrap_err();
        assert_eq!((e.line, e.key.as_deref()), (Some(2), Some("bogus")));
        assert!(e.to_string().contains("bogus"));
        let e = ProblemConfig::parse("order = two").unwrap_err();
        assert_eq!(e.key.as_deref(), Some("order"));
        let e = ProblemConfig::parse("order = 2\norder = 3").unwrap_err();
        assert_eq!(e.line, Some(2));
        assert!(ProblemConfig::parse("just text").is_err());
        assert!(ProblemConfig::parse("counts = 1 2").is_err());
        assert!(ProblemConfig::parse("poisson = 0.5").is_err());
        assert!(ProblemConfig::parse("mu = 1").is_err());
        assert!(ProblemConfig::parse("quadrature = 2").is_err());
    }

    #[test]
    fn extra_keys_pass_through() {
        let entries = parse_entries("case = a 1 1\ncase = b 2 1\nreference = 4 2\norder = 1").unwrap();
        let (c, rest) = ProblemConfig::from_entries(&entries, &["case", "reference"]).unwrap();
        assert_eq!(c.order, 1);
        assert_eq!(rest.len(), 3);
    }
}
