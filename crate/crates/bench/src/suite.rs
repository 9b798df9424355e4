use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use optiq::functions::Problem;
use optiq::quiescence::DequiescenceRule;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    Optiq,
    Newton,
    Bfgs,
    Sr1,
    ForwardEuler,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] =
        [SolverKind::Optiq, SolverKind::Newton, SolverKind::Bfgs, SolverKind::Sr1, SolverKind::ForwardEuler];

    pub fn as_str(self) -> &'static str {
        match self {
            SolverKind::Optiq => "optiq",
            SolverKind::Newton => "newton",
            SolverKind::Bfgs => "bfgs",
            SolverKind::Sr1 => "sr1",
            SolverKind::ForwardEuler => "forward_euler",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SolverKind {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| BenchError::Config(format!("unknown solver `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

impl ProblemSpec {
    pub fn named(name: impl Into<String>) -> Self {
        Self { name: name.into(), n: None, x0: None }
    }

    pub fn problem(&self) -> Result<Problem, BenchError> {
        Ok(self.name.parse::<Problem>()?)
    }

    /// Dimension actually used: the explicit `n`, else the length of `x0`,
    /// else the problem default.
    pub fn dimension(&self) -> Result<usize, BenchError> {
        let n = self.n.or(self.x0.as_ref().map(Vec::len));
        Ok(self.problem()?.resolve_dimension(n)?)
    }

    pub fn start(&self) -> Result<Vec<f64>, BenchError> {
        let n = self.dimension()?;
        match &self.x0 {
            Some(x0) if x0.len() != n => Err(BenchError::Config(format!(
                "{}: x0 has {} entries, expected {n}",
                self.name,
                x0.len()
            ))),
            Some(x0) => Ok(x0.clone()),
            None => Ok(self.problem()?.default_start(Some(n))?.as_slice().to_vec()),
        }
    }
}

fn default_eta() -> f64 {
    1e-12
}

fn default_max_iterations() -> usize {
    10_000
}

fn default_fe_safety() -> f64 {
    0.9
}

fn default_dequiescence() -> String {
    DequiescenceRule::default().as_str().to_string()
}

/// Flat JSON suite description. Everything but `problems` and `solvers`
/// has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteSpec {
    pub problems: Vec<ProblemSpec>,
    pub solvers: Vec<SolverKind>,
    #[serde(default = "default_eta")]
    pub eta: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    /// Safety factor of the bound-based forward-Euler step.
    #[serde(default = "default_fe_safety")]
    pub fe_safety: f64,
    /// Fixed forward-Euler step; overrides `fe_safety` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fe_dt: Option<f64>,
    #[serde(default = "default_dequiescence")]
    pub dequiescence: String,
    /// Directory for per-run trace CSVs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_dir: Option<PathBuf>,
}

impl SuiteSpec {
    pub fn new(problems: Vec<ProblemSpec>, solvers: Vec<SolverKind>) -> Self {
        Self {
            problems,
            solvers,
            eta: default_eta(),
            max_iterations: default_max_iterations(),
            fe_safety: default_fe_safety(),
            fe_dt: None,
            dequiescence: default_dequiescence(),
            trace_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let spec: SuiteSpec = serde_json::from_str(text).map_err(|e| BenchError::Config(format!("suite: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Config(format!("cannot read suite {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn dequiescence_rule(&self) -> Result<DequiescenceRule, BenchError> {
        Ok(self.dequiescence.parse::<DequiescenceRule>()?)
    }

    /// Checks everything that can be checked without running a solver.
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return Err(BenchError::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.max_iterations == 0 {
            return Err(BenchError::Config("max_iterations must be positive".into()));
        }
        if !(self.fe_safety.is_finite() && self.fe_safety > 0.0) {
            return Err(BenchError::Config(format!("fe_safety must be positive, got {}", self.fe_safety)));
        }
        if let Some(dt) = self.fe_dt {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(BenchError::Config(format!("fe_dt must be positive, got {dt}")));
            }
        }
        self.dequiescence_rule()?;
        for p in &self.problems {
            p.start()?;
        }
        Ok(())
    }
}
