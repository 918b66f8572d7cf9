//! Strict JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::Deserialize;
use stdd_core::iteration::SParameter;
use stdd_core::resolvent::{LinearConfig, LinearSolver, NewtonConfig, SolverConfig};
use stdd_core::SchemeKind;

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mesh: MeshConfig,
    pub time: TimeConfig,
    pub model: ModelConfig,
    pub source: SourceConfig,
    pub decomposition: DecompositionConfig,
    pub scheme: SchemeSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub rng_seed: u64,
}

/// `extent` and `cells` have one entry per space dimension (1 or 2).
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub extent: Vec<f64>,
    pub cells: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub t_final: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    PLaplace,
    /// α(z) = -z; only useful for `verify`.
    AntiMonotone,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaKind {
    Constant,
    Indicator,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub name: ModelName,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "gamma_constant")]
    pub gamma_kind: GammaKind,
    #[serde(default = "one")]
    pub gamma_value: f64,
    /// `[lo, hi]` along the first axis where γ vanishes (indicator only).
    #[serde(default)]
    pub gamma_zero_region: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceConfig {
    Zero {},
    /// Source for which `u = t·cos(πx₁/L)` is the exact solution.
    ManufacturedCos {},
    /// Space-time constant densities `η₀`, `η`.
    Custom {
        eta0: f64,
        #[serde(default)]
        eta: [f64; 2],
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecompositionConfig {
    pub q: usize,
    pub overlap_fraction: f64,
    #[serde(default = "default_c_min")]
    pub c_min: f64,
}

/// `"s": 2.0` or `"s": {"sqrt_rule": C}` for `s = C·√max_sweeps`.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum SSpec {
    Fixed(f64),
    Rule(SqrtRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqrtRule {
    pub sqrt_rule: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialGuess {
    Zero {},
    /// Uniform nodal values in `[-amplitude, amplitude]` drawn from `rng_seed`.
    Random { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    /// One of "PR", "DR", "AS", "AS_shifted".
    pub kind: String,
    /// Required for PR and DR; additive schemes default to `s = √N`.
    #[serde(default)]
    pub s: Option<SSpec>,
    pub max_sweeps: usize,
    /// Zero disables early stopping.
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_slack")]
    pub monotone_slack: f64,
    #[serde(default)]
    pub initial_guess: Option<InitialGuess>,
    #[serde(default)]
    pub solver: SolverSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverName {
    #[default]
    Auto,
    Tridiagonal,
    Cg,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub max_newton_iters: usize,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub damping: f64,
    pub epsilon_reg: f64,
    pub linear_solver: LinearSolverName,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let n = NewtonConfig::default();
        let l = LinearConfig::default();
        Self {
            max_newton_iters: n.max_iters,
            abs_tol: n.abs_tol,
            rel_tol: n.rel_tol,
            damping: n.damping,
            epsilon_reg: n.epsilon_reg,
            linear_solver: LinearSolverName::Auto,
            cg_tol: l.cg_tol,
            cg_max_iters: l.cg_max_iters,
        }
    }
}

impl SolverSpec {
    pub fn to_core(&self) -> SolverConfig {
        SolverConfig {
            newton: NewtonConfig {
                max_iters: self.max_newton_iters,
                abs_tol: self.abs_tol,
                rel_tol: self.rel_tol,
                damping: self.damping,
                epsilon_reg: self.epsilon_reg,
            },
            linear: LinearConfig {
                solver: match self.linear_solver {
                    LinearSolverName::Auto => LinearSolver::Auto,
                    LinearSolverName::Tridiagonal => LinearSolver::TridiagonalDirect,
                    LinearSolverName::Cg => LinearSolver::ConjugateGradient,
                },
                cg_tol: self.cg_tol,
                cg_max_iters: self.cg_max_iters,
            },
        }
    }
}

/// Relative paths are resolved against the directory of the config file.
#[derive(Debug, Clone, PartialEq, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv_path: Option<PathBuf>,
    #[serde(default)]
    pub json_summary_path: Option<PathBuf>,
    /// Fill the wall_ms column. Off by default so that traces are
    /// reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

fn one() -> f64 {
    1.0
}

fn two() -> f64 {
    2.0
}

fn gamma_constant() -> GammaKind {
    GammaKind::Constant
}

fn default_c_min() -> f64 {
    0.1
}

fn default_stop_tol() -> f64 {
    1e-10
}

fn default_slack() -> f64 {
    1e-10
}

impl SchemeSpec {
    pub fn kind(&self) -> Result<SchemeKind, CliError> {
        SchemeKind::parse(&self.kind).ok_or_else(|| {
            CliError::Config(format!(
                "scheme.kind: unknown scheme {:?} (expected PR, DR, AS or AS_shifted)",
                self.kind
            ))
        })
    }

    pub fn s_parameter(&self, kind: SchemeKind) -> Result<SParameter, CliError> {
        match self.s {
            Some(SSpec::Fixed(s)) => Ok(SParameter::Fixed(s)),
            Some(SSpec::Rule(r)) => Ok(SParameter::SqrtRule(r.sqrt_rule)),
            None if matches!(kind, SchemeKind::Additive | SchemeKind::AdditiveShifted) => Ok(SParameter::SqrtRule(1.0)),
            None => Err(CliError::Config(format!("scheme.s: required for {}", kind.name()))),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid config: {e}")))
    }

    /// Reads a config file; relative output paths become relative to its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        for p in [&mut cfg.output.csv_path, &mut cfg.output.json_summary_path].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}
