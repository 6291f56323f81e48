//! JSON configuration schemas, one per subcommand. Unknown fields are
//! rejected so typos fail fast.

use serde::{Deserialize, Serialize};

pub use gsr_core::experiments::{ExperimentConfig, LebesgueConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizeConfig {
    pub dim: usize,
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyUsdConfig {
    pub dim: usize,
    /// Dictionary level J: all frequencies below 2^J per axis.
    pub level: usize,
    pub sparsity: usize,
    pub p: f64,
    /// Number of random points to draw; ignored when `points_csv` or
    /// `grid` is set.
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub points_csv: Option<String>,
    /// Use the full tensor-product uniform grid with this many nodes per
    /// axis instead of random points.
    #[serde(default)]
    pub grid: Option<usize>,
    pub trials: usize,
    #[serde(default = "default_refine")]
    pub refine_cycles: usize,
    pub seed: u64,
}

pub fn default_refine() -> usize {
    3
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum RipNormKind {
    Euclidean,
    Synthesis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RipCheckConfig {
    pub dim: usize,
    pub level: usize,
    pub p: f64,
    pub v: usize,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub points_csv: Option<String>,
    pub norm: RipNormKind,
    pub trials: usize,
    #[serde(default = "default_refine")]
    pub refine_cycles: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormContextConfig {
    /// Continuous norm under normalized Lebesgue measure.
    Continuous,
    /// Empirical measure on m random points.
    Discrete { m: usize },
    /// Half/half mixture of the quadrature and empirical measures.
    Mixed { m: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncoherenceConfig {
    pub dim: usize,
    pub level: usize,
    pub p: f64,
    pub v: usize,
    pub s: usize,
    pub exponent_r: f64,
    pub context: NormContextConfig,
    pub trials: usize,
    #[serde(default = "default_refine")]
    pub refine_cycles: usize,
    /// Also estimate the unconditionality constant on the same context.
    #[serde(default)]
    pub unconditionality: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Exactly sparse combination plus a dense bounded perturbation.
    Sparse { terms: usize, perturbation: f64 },
    /// A class member.
    Member {
        smoothness_r: f64,
        beta: f64,
        density: f64,
        level: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecoverConfig {
    pub dim: usize,
    pub level: usize,
    pub p: f64,
    pub t: f64,
    pub max_iter: usize,
    #[serde(default)]
    pub stop_tol: f64,
    pub m: usize,
    pub signal: SignalSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    #[serde(flatten)]
    pub experiment: ExperimentConfig,
    /// Reference slope drawn on the plot.
    #[serde(default)]
    pub reference_slope: Option<f64>,
    /// Also run and emit the linear baseline.
    #[serde(default)]
    pub with_linear: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCompareConfig {
    pub dim: usize,
    pub level: usize,
    pub p: f64,
    /// Compare after u = 1..=v_max iterations.
    pub v_max: usize,
    pub m: usize,
    pub instances: usize,
    pub sparse_terms: usize,
    pub perturbation: f64,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
    pub seed: u64,
}

pub fn default_oracle_cap() -> u64 {
    200_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotConfig {
    /// Path to a rate-table JSON produced by `rates`.
    pub table: String,
    #[serde(default)]
    pub reference_slope: Option<f64>,
    /// Unused by the plot itself; kept so every subcommand resolves a seed
    /// into its manifest.
    #[serde(default)]
    pub seed: u64,
}
