//! End-to-end recovery experiments: sampling-recovery rate sweeps over the
//! coefficient classes, the linear least-squares baseline on the same
//! samples, best-approximation ratio ensembles, rate fitting, and report
//! emission (CSV / JSON / SVG).

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::classes::{sample_member, ClassSpec, MemberMode};
use crate::discretization::{coeffs_json, sample_budget, verify_usd, SearchConfig, UsdReport};
use crate::error::{Error, Result};
use crate::greedy::{
    bv_best_vterm_recovery, count_combinations, iteration_budget, sigma_v_bruteforce,
    sigma_v_sup_bruteforce, wcga_run, BudgetMode, BudgetSpec, SampledSystem, WcgaParams,
};
use crate::linalg::{cg_hermitian, solve_hpd, ToeplitzOperator};
use crate::lp::{LpExponent, SampledFunction};
use crate::points::{draw_random_points, DiscreteMeasure, PointSet};
use crate::rng::fnv1a;
use crate::scalar::Real;
use crate::trig::{
    continuous_lp_norm, eval_coeffs, CoefficientVector, FrequencyIndex, TrigSystem,
};
use crate::Cplx;

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassConfig {
    pub smoothness_r: f64,
    pub beta: f64,
    pub dim: usize,
}

/// One slice of the member ensemble: `count` members drawn with the given
/// per-level density, generated up to `level`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemberSpec {
    pub density: f64,
    pub level: usize,
    pub count: usize,
    #[serde(default)]
    pub slack: bool,
}

/// How the sample count `m` depends on the sparsity target `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum SampleRule {
    /// `m = ceil(c * v * ln(2v)^log_power)`.
    LogPower { log_power: u32, c: f64 },
    /// The two-regime sample-count formula with `u = v`.
    Budget { c: f64, epsilon: f64, bessel_k: f64 },
    /// Explicit per-v values (parallel to the v grid).
    Explicit { m: Vec<usize> },
}

impl SampleRule {
    fn m_for(&self, v_index: usize, v: usize, p: LpExponent<f64>, n_dict: usize) -> Result<usize> {
        match self {
            SampleRule::LogPower { log_power, c } => {
                let m = c * v as f64 * (2.0 * v as f64).ln().powi(*log_power as i32);
                Ok(m.ceil() as usize)
            }
            SampleRule::Budget { c, epsilon, bessel_k } => {
                Ok(sample_budget(p, v, n_dict, *bessel_k, *epsilon, *c)?.m)
            }
            SampleRule::Explicit { m } => m.get(v_index).copied().ok_or_else(|| {
                Error::InvalidParameter("explicit sample rule shorter than the v grid".into())
            }),
        }
    }
}

/// Dictionary level per v-grid entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum DictLevels {
    Fixed { level: usize },
    PerV { levels: Vec<usize> },
}

impl DictLevels {
    fn level_for(&self, v_index: usize) -> Result<usize> {
        match self {
            DictLevels::Fixed { level } => Ok(*level),
            DictLevels::PerV { levels } => levels.get(v_index).copied().ok_or_else(|| {
                Error::InvalidParameter("per-v dictionary levels shorter than the v grid".into())
            }),
        }
    }
}

/// How many WCGA iterations to run at sparsity target `v`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum IterationRule {
    /// `u = ceil(c * v)`; in the Hilbert-space regime linearly many
    /// iterations already deliver the best-v-term comparison.
    ScaledV { c: f64 },
    /// The incoherence-driven budget `ceil(c (2V)^{q*} ln(2Vv) v^{r q*})`.
    Incoherence {
        incoherence_v: f64,
        incoherence_r: f64,
        c: f64,
    },
    /// The incoherence budget with the logarithm replaced by `ln(3U+1)`.
    Unconditionality {
        incoherence_v: f64,
        incoherence_r: f64,
        unconditionality: f64,
        c: f64,
    },
}

impl IterationRule {
    fn u_for(&self, v: usize, t: f64, p: LpExponent<f64>) -> Result<usize> {
        match self {
            IterationRule::ScaledV { c } => Ok(((c * v as f64).ceil() as usize).max(1)),
            IterationRule::Incoherence {
                incoherence_v,
                incoherence_r,
                c,
            } => {
                let mut spec = BudgetSpec::new(t, p, *incoherence_v, *incoherence_r, v);
                spec.c = *c;
                Ok(iteration_budget(&spec, BudgetMode::Incoherence)?.u)
            }
            IterationRule::Unconditionality {
                incoherence_v,
                incoherence_r,
                unconditionality,
                c,
            } => {
                let mut spec = BudgetSpec::new(t, p, *incoherence_v, *incoherence_r, v);
                spec.c = *c;
                spec.unconditionality = Some(*unconditionality);
                Ok(iteration_budget(&spec, BudgetMode::Unconditionality)?.u)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreedyConfig {
    pub t: f64,
    pub iterations: IterationRule,
    #[serde(default)]
    pub stop_tol: f64,
    #[serde(default = "default_projection_tol")]
    pub projection_tol: f64,
    #[serde(default = "default_projection_max_iter")]
    pub projection_max_iter: usize,
}

fn default_projection_tol() -> f64 {
    1e-9
}

fn default_projection_max_iter() -> usize {
    500
}

/// Certification gate run before each recovery cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsdGateConfig {
    pub trials: usize,
    pub refine_cycles: usize,
    /// Redraws allowed after a failed certificate.
    #[serde(default = "default_redraws")]
    pub max_redraws: usize,
    /// Certified sparsity = max(1, ceil(scale * v)).
    #[serde(default = "default_sparsity_scale")]
    pub sparsity_scale: f64,
}

fn default_redraws() -> usize {
    5
}

fn default_sparsity_scale() -> f64 {
    1.0
}

/// Linear-baseline knobs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearConfig {
    /// Subspace dimension cap as a fraction of m.
    #[serde(default = "default_dim_fraction")]
    pub dim_fraction: f64,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
}

fn default_dim_fraction() -> f64 {
    0.5
}

fn default_ridge() -> f64 {
    0.0
}

fn default_cg_tol() -> f64 {
    1e-10
}

fn default_cg_max_iter() -> usize {
    1500
}

impl Default for LinearConfig {
    fn default() -> Self {
        Self {
            dim_fraction: default_dim_fraction(),
            ridge: default_ridge(),
            cg_tol: default_cg_tol(),
            cg_max_iter: default_cg_max_iter(),
        }
    }
}

/// Full description of a rate experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub class: ClassConfig,
    pub p: f64,
    pub v_grid: Vec<usize>,
    pub samples: SampleRule,
    pub dictionary: DictLevels,
    pub members: Vec<MemberSpec>,
    pub greedy: GreedyConfig,
    pub usd: UsdGateConfig,
    pub seed: u64,
    /// Adds the best-v-term oracle column (analytic at p = 2).
    #[serde(default)]
    pub sigma_oracle: bool,
    #[serde(default)]
    pub linear: Option<LinearConfig>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.v_grid.is_empty() || self.v_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "v grid must be nonempty and strictly increasing".into(),
            ));
        }
        if self.members.is_empty() || self.members.iter().all(|m| m.count == 0) {
            return Err(Error::InvalidParameter("member ensemble is empty".into()));
        }
        LpExponent::new(self.p)?;
        ClassSpec::new(self.class.smoothness_r, self.class.beta, self.class.dim)?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

/// Certification outcome of one cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GateOutcome {
    pub certified: bool,
    pub attempts: usize,
    pub lower_ratio: f64,
    pub upper_ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateRow {
    pub v: usize,
    pub m: usize,
    pub dict_level: usize,
    pub iterations: usize,
    pub gate: GateOutcome,
    /// Per-member recovery errors in the continuous norm (empty when the
    /// gate hard-failed).
    pub errors: Vec<f64>,
    pub mean_error: f64,
    pub max_error: f64,
    /// Best v-term oracle error (max over members) when available.
    pub sigma_oracle: Option<f64>,
    /// Members whose least-squares solve needed the ridge fallback
    /// (linear baseline only).
    #[serde(default)]
    pub ridge_fallbacks: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum FitAxis {
    SparsityV,
    SampleCountM,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RateTable {
    pub label: String,
    pub axis: FitAxis,
    pub rows: Vec<RateRow>,
    pub fit: Option<RateFit>,
}

/// Least-squares fit of `log error` against `log x`. Pairs with a
/// nonpositive entry are filtered; fewer than four survivors refuse.
pub fn fit_rate(xs: &[f64], errors: &[f64]) -> Result<RateFit> {
    if xs.len() != errors.len() {
        return Err(Error::DimensionMismatch {
            context: "rate fit inputs",
            expected: xs.len(),
            got: errors.len(),
        });
    }
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(errors)
        .filter(|(&x, &e)| x > 0.0 && e > 0.0)
        .map(|(&x, &e)| (x.ln(), e.ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::InvalidParameter(format!(
            "rate fit needs at least 4 positive rows, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return Err(Error::InvalidParameter(
            "degenerate abscissae in rate fit".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = (pts
        .iter()
        .map(|(x, y)| {
            let d = y - (slope * x + intercept);
            d * d
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(RateFit {
        slope,
        intercept,
        residual,
    })
}

fn fit_table(rows: &[RateRow], axis: FitAxis) -> Option<RateFit> {
    let xs: Vec<f64> = rows
        .iter()
        .map(|r| match axis {
            FitAxis::SparsityV => r.v as f64,
            FitAxis::SampleCountM => r.m as f64,
        })
        .collect();
    let es: Vec<f64> = rows.iter().map(|r| r.max_error).collect();
    fit_rate(&xs, &es).ok()
}

// ---------------------------------------------------------------------------
// Shared pipeline pieces
// ---------------------------------------------------------------------------

fn derive_seed(seed: u64, tag: &str, a: u64, b: u64) -> u64 {
    seed ^ fnv1a(format!("{}:{}:{}", tag, a, b).as_bytes())
}

/// Draws points for a cell and runs the certification gate, redrawing with a
/// fresh stream after each failure.
fn certified_points<T: Real>(
    system: &TrigSystem,
    m: usize,
    sparsity: usize,
    p: LpExponent<T>,
    usd: &UsdGateConfig,
    seed: u64,
    cell: u64,
) -> Result<(PointSet<T>, GateOutcome, UsdReport<T>)> {
    let mut attempt = 0usize;
    loop {
        let pts_seed = derive_seed(seed, "cell-points", cell, attempt as u64);
        let points = draw_random_points::<T>(system.dim(), m, pts_seed)?;
        let report = verify_usd(
            system,
            &points,
            sparsity,
            p,
            &SearchConfig::new(
                usd.trials,
                usd.refine_cycles,
                derive_seed(seed, "cell-usd", cell, attempt as u64),
            ),
        )?;
        if report.pass || attempt >= usd.max_redraws {
            let gate = GateOutcome {
                certified: report.pass,
                attempts: attempt + 1,
                lower_ratio: report.lower_ratio.to_f64_lossy(),
                upper_ratio: report.upper_ratio.to_f64_lossy(),
            };
            return Ok((points, gate, report));
        }
        attempt += 1;
    }
}

/// Generates the member ensemble of a cell (deterministic per member index,
/// so shrinking the ensemble keeps a prefix).
fn cell_members<T: Real>(
    config: &ExperimentConfig,
    seed: u64,
    cell: u64,
) -> Result<Vec<CoefficientVector<T>>> {
    let spec = ClassSpec::<T>::new(
        T::of(config.class.smoothness_r),
        T::of(config.class.beta),
        config.class.dim,
    )?;
    let mut members = Vec::new();
    let mut counter = 0u64;
    for ms in &config.members {
        for _ in 0..ms.count {
            let mode = if ms.slack {
                MemberMode::Slack
            } else {
                MemberMode::Extremal
            };
            members.push(sample_member(
                &spec,
                ms.level,
                ms.density,
                mode,
                derive_seed(seed, "cell-members", cell, 0),
                counter,
            )?);
            counter += 1;
        }
    }
    Ok(members)
}

/// Continuous error of an approximant against the member, both given by
/// coefficients: Parseval at p = 2, quadrature otherwise.
fn continuous_error<T: Real>(
    member: &CoefficientVector<T>,
    approx: &CoefficientVector<T>,
    p: LpExponent<T>,
) -> Result<T> {
    continuous_lp_norm(&member.sub(approx), p)
}

/// Exact best v-term error of a member in continuous `L_2` over a trig
/// dictionary: keep the v largest in-dictionary coefficients; the error is
/// the Euclidean tail (out-of-dictionary mass included).
fn sigma_v_l2_analytic<T: Real>(member: &CoefficientVector<T>, system: &TrigSystem, v: usize) -> T {
    let mut in_dict: Vec<T> = Vec::new();
    let mut out_mass = T::zero();
    for (k, a) in member.iter() {
        if system.index_of(k).is_some() {
            in_dict.push(a.norm_sqr());
        } else {
            out_mass = out_mass + a.norm_sqr();
        }
    }
    in_dict.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let tail: T = in_dict.into_iter().skip(v).sum();
    (tail + out_mass).sqrt()
}

// ---------------------------------------------------------------------------
// Recovery pipeline
// ---------------------------------------------------------------------------

/// Nonlinear sampling-recovery sweep: per sparsity target `v`, draw a
/// certified point set, sample every class member on it, run the WCGA for
/// the budgeted number of iterations in the empirical `L_p` space, and
/// aggregate the continuous errors. The max over members estimates the
/// optimal-recovery quantity from below.
pub fn recovery_pipeline<T: Real>(config: &ExperimentConfig) -> Result<RateTable> {
    config.validate()?;
    let p = LpExponent::new(T::of(config.p))?;
    let p64 = LpExponent::new(config.p)?;
    let mut rows = Vec::new();
    for (vi, &v) in config.v_grid.iter().enumerate() {
        let dict_level = config.dictionary.level_for(vi)?;
        let system = Arc::new(TrigSystem::new(config.class.dim, dict_level)?);
        let m = config.samples.m_for(vi, v, p64, system.len())?;
        let sparsity =
            ((config.usd.sparsity_scale * v as f64).ceil() as usize).clamp(1, system.len());
        let (points, gate, _) =
            certified_points::<T>(&system, m, sparsity, p, &config.usd, config.seed, vi as u64)?;
        let u = config.greedy.iterations.u_for(v, config.greedy.t, p64)?;

        let mut errors: Vec<f64> = Vec::new();
        let mut sigma_max: Option<f64> = None;
        if gate.certified {
            let measure = Arc::new(DiscreteMeasure::uniform(points));
            let sampled = SampledSystem::trig(Arc::clone(&system), Arc::clone(&measure))?;
            let members = cell_members::<T>(config, config.seed, vi as u64)?;
            let mut params = WcgaParams::new(p, T::of(config.greedy.t));
            params.max_iter = u;
            params.stop_tol = T::of(config.greedy.stop_tol);
            params.projection_tol = T::of(config.greedy.projection_tol);
            params.projection_max_iter = config.greedy.projection_max_iter;

            for member in &members {
                let values = eval_coeffs(member, measure.support());
                let f0 = SampledFunction::new(values, Arc::clone(&measure))?;
                let trace = wcga_run(&f0, &sampled, &params)?;
                let approx = sampled
                    .coefficients_by_frequency(&trace.support, trace.final_coefficients())
                    .expect("trig system yields frequency coefficients");
                let err = continuous_error(member, &approx, p)?;
                errors.push(err.to_f64_lossy());

                if config.sigma_oracle && p.is_two() {
                    let s = sigma_v_l2_analytic(member, &system, v).to_f64_lossy();
                    sigma_max = Some(sigma_max.map_or(s, |x: f64| x.max(s)));
                }
            }
        }
        let (mean, max) = summarize(&errors);
        rows.push(RateRow {
            v,
            m,
            dict_level,
            iterations: u,
            gate,
            errors,
            mean_error: mean,
            max_error: max,
            sigma_oracle: sigma_max,
            ridge_fallbacks: 0,
        });
    }
    let fit = fit_table(&rows, FitAxis::SparsityV);
    Ok(RateTable {
        label: "wcga-recovery".into(),
        axis: FitAxis::SparsityV,
        rows,
        fit,
    })
}

fn summarize(errors: &[f64]) -> (f64, f64) {
    if errors.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let max = errors.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (mean, max)
}

// ---------------------------------------------------------------------------
// Linear baseline
// ---------------------------------------------------------------------------

/// Least-squares recovery onto the span of all frequencies below a cutoff
/// chosen so the subspace dimension stays within `dim_fraction * m`, from
/// the same certified samples as the nonlinear pipeline. Univariate
/// problems exploit the Toeplitz structure of the normal equations through
/// FFT-accelerated conjugate gradients; other dimensions solve dense normal
/// equations. The fitted slope is taken against the sample count, which is
/// the natural axis for linear-width comparisons.
pub fn linear_baseline<T: Real>(config: &ExperimentConfig) -> Result<RateTable> {
    config.validate()?;
    if config.p != 2.0 {
        return Err(Error::InvalidParameter(
            "the linear baseline compares Hilbert-space errors; p must be 2".into(),
        ));
    }
    let lin = config.linear.clone().unwrap_or_default();
    let p = LpExponent::new(T::of(2.0))?;
    let p64 = LpExponent::new(2.0)?;
    let mut rows = Vec::new();
    for (vi, &v) in config.v_grid.iter().enumerate() {
        let dict_level = config.dictionary.level_for(vi)?;
        let system = Arc::new(TrigSystem::new(config.class.dim, dict_level)?);
        let m = config.samples.m_for(vi, v, p64, system.len())?;
        let sparsity =
            ((config.usd.sparsity_scale * v as f64).ceil() as usize).clamp(1, system.len());
        let (points, gate, _) =
            certified_points::<T>(&system, m, sparsity, p, &config.usd, config.seed, vi as u64)?;

        let budget = (m as f64 * lin.dim_fraction).floor() as usize;
        let cutoff = cutoff_for_budget(config.class.dim, budget).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "sample count {} below the smallest linear subspace",
                m
            ))
        })?;

        let mut errors: Vec<f64> = Vec::new();
        let mut ridge_fallbacks = 0usize;
        if gate.certified {
            let members = cell_members::<T>(config, config.seed, vi as u64)?;
            let solver = LinearSolver::new(&points, config.class.dim, cutoff, &lin)?;
            for member in &members {
                let values = eval_coeffs(member, &points);
                let (estimate, ridged) = solver.solve(&values)?;
                if ridged {
                    ridge_fallbacks += 1;
                }
                // Parseval: in-span coefficient error plus out-of-span tail.
                let mut err_sq = T::zero();
                let mut seen = std::collections::HashSet::new();
                for (k, a) in member.iter() {
                    if k.inf_norm() < cutoff as i64 {
                        let diff = *a - estimate.get(k);
                        err_sq = err_sq + diff.norm_sqr();
                        seen.insert(k.clone());
                    } else {
                        err_sq = err_sq + a.norm_sqr();
                    }
                }
                for (k, c) in estimate.iter() {
                    if !seen.contains(k) {
                        err_sq = err_sq + c.norm_sqr();
                    }
                }
                errors.push(err_sq.sqrt().to_f64_lossy());
            }
        }
        let (mean, max) = summarize(&errors);
        rows.push(RateRow {
            v,
            m,
            dict_level,
            iterations: 0,
            gate,
            errors,
            mean_error: mean,
            max_error: max,
            sigma_oracle: None,
            ridge_fallbacks,
        });
    }
    let fit = fit_table(&rows, FitAxis::SampleCountM);
    Ok(RateTable {
        label: "linear-baseline".into(),
        axis: FitAxis::SampleCountM,
        rows,
        fit,
    })
}

/// Largest cutoff `n` with `(2n-1)^d <= budget`; None when even `n = 1`
/// does not fit.
fn cutoff_for_budget(dim: usize, budget: usize) -> Option<usize> {
    let mut n = 0usize;
    loop {
        let next = n + 1;
        let d = (2 * next - 1).checked_pow(dim as u32)?;
        if d > budget {
            break;
        }
        n = next;
        if n > 1 << 24 {
            break;
        }
    }
    if n == 0 {
        None
    } else {
        Some(n)
    }
}

/// Normal-equation solver for the projection onto `span{e^{i(k,x)}:
/// ||k||_inf < cutoff}` over a fixed point set.
struct LinearSolver<'a, T: Real> {
    points: &'a PointSet<T>,
    cutoff: usize,
    ridge: f64,
    cg_tol: f64,
    cg_max_iter: usize,
    /// Univariate fast path.
    toeplitz: Option<ToeplitzOperator<T>>,
    /// Dense fallback Gram (row-major) with its frequency list.
    dense: Option<(Vec<Cplx<T>>, Vec<FrequencyIndex>)>,
}

impl<'a, T: Real> LinearSolver<'a, T> {
    fn new(
        points: &'a PointSet<T>,
        dim: usize,
        cutoff: usize,
        lin: &LinearConfig,
    ) -> Result<Self> {
        let m_inv = T::one() / T::of(points.count() as f64);
        if dim == 1 {
            let d = 2 * cutoff - 1;
            // Gram entries G[i][j] = (1/m) Σ_j e^{i (k_j - k_i) x}; as a
            // Toeplitz operator with lag l = i - j this is the conjugate of
            // the forward sum at l.
            let sums = phase_sums(points, None, (d as i64) - 1);
            let mut lags = vec![Complex::new(T::zero(), T::zero()); 2 * d - 1];
            for l in -((d as i64) - 1)..=(d as i64 - 1) {
                let z = sums[(l + d as i64 - 1) as usize].conj();
                lags[(l + d as i64 - 1) as usize] = z * m_inv;
            }
            Ok(Self {
                points,
                cutoff,
                ridge: lin.ridge,
                cg_tol: lin.cg_tol,
                cg_max_iter: lin.cg_max_iter,
                toeplitz: Some(ToeplitzOperator::new(&lags, d)),
                dense: None,
            })
        } else {
            let freqs = cube_frequencies(dim, cutoff);
            let nd = freqs.len();
            if nd > 4000 {
                return Err(Error::InvalidParameter(format!(
                    "dense linear baseline with {} unknowns is beyond desk scale",
                    nd
                )));
            }
            let cols: Vec<Vec<Cplx<T>>> = freqs
                .iter()
                .map(|k| crate::trig::atom_values(k, points))
                .collect();
            let mut gram = vec![Complex::new(T::zero(), T::zero()); nd * nd];
            for i in 0..nd {
                for j in i..nd {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for (a, b) in cols[i].iter().zip(&cols[j]) {
                        acc = acc + a.conj() * *b;
                    }
                    acc = acc * m_inv;
                    gram[i * nd + j] = acc;
                    gram[j * nd + i] = acc.conj();
                }
            }
            Ok(Self {
                points,
                cutoff,
                ridge: lin.ridge,
                cg_tol: lin.cg_tol,
                cg_max_iter: lin.cg_max_iter,
                toeplitz: None,
                dense: Some((gram, freqs)),
            })
        }
    }

    /// Returns the estimate and whether a ridge fallback was needed.
    fn solve(&self, samples: &[Cplx<T>]) -> Result<(CoefficientVector<T>, bool)> {
        let m_inv = T::one() / T::of(self.points.count() as f64);
        if let Some(op) = &self.toeplitz {
            let d = 2 * self.cutoff - 1;
            // rhs_k = (1/m) Σ_j f_j e^{-i k x_j}: conjugate the k-th forward
            // sum of conj(f).
            let conj_samples: Vec<Cplx<T>> = samples.iter().map(|z| z.conj()).collect();
            let sums = phase_sums(self.points, Some(&conj_samples), (self.cutoff as i64) - 1);
            let rhs: Vec<Cplx<T>> = (0..d)
                .map(|i| {
                    let k = i as i64 - (self.cutoff as i64 - 1);
                    sums[(k + self.cutoff as i64 - 1) as usize].conj() * m_inv
                })
                .collect();
            let run = |ridge: f64| -> (Vec<Cplx<T>>, T) {
                let ridge_t = T::of(ridge);
                let apply = |x: &[Cplx<T>]| -> Vec<Cplx<T>> {
                    let mut out = op.apply(x);
                    if ridge > 0.0 {
                        for (o, xi) in out.iter_mut().zip(x) {
                            *o = *o + *xi * ridge_t;
                        }
                    }
                    out
                };
                cg_hermitian(apply, &rhs, T::of(self.cg_tol), self.cg_max_iter)
            };
            let (c, rel) = run(self.ridge);
            if rel.to_f64_lossy() > self.cg_tol * 1e3 {
                // Singular or near-singular normal equations: regularize.
                let (c2, rel2) = run(self.ridge.max(1e-10) * 1e2);
                if rel2 < rel {
                    return Ok((self.univariate_coeffs(c2), true));
                }
            }
            Ok((self.univariate_coeffs(c), false))
        } else {
            let (gram, freqs) = self.dense.as_ref().unwrap();
            let nd = freqs.len();
            let mut rhs = vec![Complex::new(T::zero(), T::zero()); nd];
            for (i, k) in freqs.iter().enumerate() {
                let col = crate::trig::atom_values(k, self.points);
                let mut acc = Complex::new(T::zero(), T::zero());
                for (g, f) in col.iter().zip(samples) {
                    acc = acc + g.conj() * *f;
                }
                rhs[i] = acc * m_inv;
            }
            let (c, ridged) = solve_hpd(gram, nd, &rhs)?;
            Ok((
                CoefficientVector::from_pairs(freqs.iter().cloned().zip(c)),
                ridged,
            ))
        }
    }

    fn univariate_coeffs(&self, c: Vec<Cplx<T>>) -> CoefficientVector<T> {
        CoefficientVector::from_pairs(c.into_iter().enumerate().map(|(i, a)| {
            let k = i as i64 - (self.cutoff as i64 - 1);
            (FrequencyIndex(vec![k]), a)
        }))
    }
}

use crate::trig::univariate_phase_sums as phase_sums;

fn cube_frequencies(dim: usize, cutoff: usize) -> Vec<FrequencyIndex> {
    let range: Vec<i64> = (-(cutoff as i64 - 1)..=(cutoff as i64 - 1)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    'outer: loop {
        out.push(FrequencyIndex(idx.iter().map(|&i| range[i]).collect()));
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < range.len() {
                continue 'outer;
            }
            idx[a] = 0;
            if a == 0 {
                break 'outer;
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Lebesgue ratio ensemble
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LebesgueConfig {
    pub dim: usize,
    pub dict_level: usize,
    pub p: f64,
    /// Best-approximation sparsity target.
    pub v: usize,
    pub m: usize,
    pub trials: usize,
    /// Exactly sparse part of each trial signal.
    pub sparse_terms: usize,
    /// Relative size of the dense perturbation added on top.
    pub perturbation: f64,
    pub greedy: GreedyConfig,
    pub usd: UsdGateConfig,
    pub seed: u64,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: u64,
}

fn default_oracle_cap() -> u64 {
    200_000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LebesgueRow {
    pub trial: usize,
    pub wcga_error: f64,
    pub bv_error: f64,
    pub sigma_sup: f64,
    pub sigma_mixed: f64,
    /// None when the recovery hit the exactness threshold.
    pub wcga_over_sigma_sup: Option<f64>,
    pub wcga_over_sigma_mixed: Option<f64>,
    pub bv_over_sigma_sup: Option<f64>,
    pub exact: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LebesgueTable {
    pub rows: Vec<LebesgueRow>,
    pub gate: GateOutcome,
    pub iterations: usize,
    /// Fraction of trials where the brute-force recovery is no worse than
    /// the WCGA.
    pub bv_no_worse_fraction: f64,
    /// (min, median, max) of the finite WCGA/sup-oracle ratios.
    pub ratio_quantiles: Option<(f64, f64, f64)>,
}

/// Best-approximation ratio ensemble: random signals (exactly sparse plus a
/// bounded perturbation) recovered both by the WCGA and by brute-force best
/// v-term from the same samples; errors are compared against sup-norm and
/// mixed-measure best v-term oracles. Ratios are reported, only their
/// finiteness is asserted.
pub fn lebesgue_ensemble<T: Real>(config: &LebesgueConfig) -> Result<LebesgueTable> {
    let p = LpExponent::new(T::of(config.p))?;
    let p64 = LpExponent::new(config.p)?;
    let system = Arc::new(TrigSystem::new(config.dim, config.dict_level)?);
    if config.sparse_terms > system.len() || config.v > system.len() {
        return Err(Error::InvalidParameter(
            "sparsity above dictionary size".into(),
        ));
    }
    let cap = config.oracle_cap as u128;
    let combos = count_combinations(system.len(), config.v);
    if combos > cap {
        return Err(Error::CombinatorialCap {
            n: system.len(),
            v: config.v,
            count: combos,
            cap,
        });
    }
    let sparsity = ((config.usd.sparsity_scale * config.v as f64).ceil() as usize)
        .clamp(1, system.len());
    let (points, gate, _) =
        certified_points::<T>(&system, config.m, sparsity, p, &config.usd, config.seed, 0)?;
    let measure = Arc::new(DiscreteMeasure::uniform(points));
    let sampled = SampledSystem::trig(Arc::clone(&system), Arc::clone(&measure))?;
    let u = config
        .greedy
        .iterations
        .u_for(config.v, config.greedy.t, p64)?;

    // Oracle measures: quadrature stand-in for the continuous measure and
    // its half/half mixture with the sample points.
    let quad = Arc::new(DiscreteMeasure::quadrature(
        config.dim,
        system.max_frequency(),
    )?);
    let mixed = Arc::new(DiscreteMeasure::mixed(&quad, &measure)?);
    let quad_system = SampledSystem::trig(Arc::clone(&system), Arc::clone(&quad))?;
    let mixed_system = SampledSystem::trig(Arc::clone(&system), Arc::clone(&mixed))?;

    let mut params = WcgaParams::new(p, T::of(config.greedy.t));
    params.max_iter = u;
    params.stop_tol = T::of(config.greedy.stop_tol);
    params.projection_tol = T::of(config.greedy.projection_tol);
    params.projection_max_iter = config.greedy.projection_max_iter;

    let mut rows = Vec::new();
    let mut not_worse = 0usize;
    for trial in 0..config.trials {
        // Signal: exactly sparse combination plus a dense bounded tail.
        let mut rng = crate::rng::stream(
            derive_seed(config.seed, "lebesgue-signal", trial as u64, 0),
            "signal",
            0,
        );
        use rand::Rng;
        let mut signal = CoefficientVector::<T>::new();
        let mut pool: Vec<usize> = (0..system.len()).collect();
        for i in 0..config.sparse_terms {
            let pick = rng.random_range(i..system.len());
            pool.swap(i, pick);
            let k = system.frequency(pool[i]).clone();
            signal.insert(
                k,
                Complex::from_polar(
                    T::of(0.5 + rng.random::<f64>()),
                    T::of(rng.random::<f64>() * std::f64::consts::TAU),
                ),
            );
        }
        if config.perturbation > 0.0 {
            let amp = config.perturbation / system.len() as f64;
            for i in 0..system.len() {
                let z = Complex::from_polar(
                    T::of(amp * rng.random::<f64>()),
                    T::of(rng.random::<f64>() * std::f64::consts::TAU),
                );
                let k = system.frequency(i).clone();
                let prev = signal.get(&k);
                signal.insert(k, prev + z);
            }
        }
        let f0_norm = continuous_lp_norm(&signal, p)?.to_f64_lossy();

        let samples = SampledFunction::new(
            eval_coeffs(&signal, measure.support()),
            Arc::clone(&measure),
        )?;
        let trace = wcga_run(&samples, &sampled, &params)?;
        let wcga_approx = sampled
            .coefficients_by_frequency(&trace.support, trace.final_coefficients())
            .unwrap();
        let wcga_err = continuous_error(&signal, &wcga_approx, p)?.to_f64_lossy();

        let bv = bv_best_vterm_recovery(&samples, &sampled, config.v, p, cap)?;
        let bv_approx = sampled
            .coefficients_by_frequency(&bv.support, &bv.coefficients)
            .unwrap();
        let bv_err = continuous_error(&signal, &bv_approx, p)?.to_f64_lossy();

        let f_quad = SampledFunction::new(eval_coeffs(&signal, quad.support()), Arc::clone(&quad))?;
        let sigma_sup = sigma_v_sup_bruteforce(&f_quad, &quad_system, config.v, cap)?
            .error
            .to_f64_lossy();
        let f_mixed =
            SampledFunction::new(eval_coeffs(&signal, mixed.support()), Arc::clone(&mixed))?;
        let sigma_mixed = sigma_v_bruteforce(&f_mixed, &mixed_system, config.v, p, cap)?
            .error
            .to_f64_lossy();

        let exact = wcga_err <= 1e-8 * f0_norm;
        let ratio = |err: f64, sigma: f64| -> Option<f64> {
            if err <= 1e-8 * f0_norm || sigma <= 0.0 {
                None
            } else {
                Some(err / sigma)
            }
        };
        if bv_err <= wcga_err * (1.0 + 1e-12) {
            not_worse += 1;
        }
        rows.push(LebesgueRow {
            trial,
            wcga_error: wcga_err,
            bv_error: bv_err,
            sigma_sup,
            sigma_mixed,
            wcga_over_sigma_sup: ratio(wcga_err, sigma_sup),
            wcga_over_sigma_mixed: ratio(wcga_err, sigma_mixed),
            bv_over_sigma_sup: ratio(bv_err, sigma_sup),
            exact,
        });
    }
    let mut finite: Vec<f64> = rows.iter().filter_map(|r| r.wcga_over_sigma_sup).collect();
    finite.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = if finite.is_empty() {
        None
    } else {
        Some((
            finite[0],
            finite[finite.len() / 2],
            finite[finite.len() - 1],
        ))
    };
    Ok(LebesgueTable {
        bv_no_worse_fraction: not_worse as f64 / rows.len().max(1) as f64,
        rows,
        gate,
        iterations: u,
        ratio_quantiles: quantiles,
    })
}

// ---------------------------------------------------------------------------
// Emission: CSV, JSON, SVG
// ---------------------------------------------------------------------------

pub fn rate_table_csv(table: &RateTable) -> String {
    let mut out =
        String::from("v,m,dict_level,iterations,certified,mean_error,max_error,sigma_oracle\n");
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.v,
            r.m,
            r.dict_level,
            r.iterations,
            r.gate.certified,
            r.mean_error,
            r.max_error,
            r.sigma_oracle.map_or(String::new(), |s| format!("{}", s)),
        ));
    }
    out
}

pub fn rate_table_json(table: &RateTable) -> serde_json::Value {
    serde_json::to_value(table).expect("rate table serializes")
}

pub fn lebesgue_table_csv(table: &LebesgueTable) -> String {
    let mut out = String::from(
        "trial,wcga_error,bv_error,sigma_sup,sigma_mixed,wcga_over_sigma_sup,wcga_over_sigma_mixed,bv_over_sigma_sup,exact\n",
    );
    let opt = |v: Option<f64>| v.map_or(String::from("exact"), |x| format!("{}", x));
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.trial,
            r.wcga_error,
            r.bv_error,
            r.sigma_sup,
            r.sigma_mixed,
            opt(r.wcga_over_sigma_sup),
            opt(r.wcga_over_sigma_mixed),
            opt(r.bv_over_sigma_sup),
            r.exact,
        ));
    }
    out
}

pub fn lebesgue_table_json(table: &LebesgueTable) -> serde_json::Value {
    serde_json::to_value(table).expect("lebesgue table serializes")
}

/// Hand-rolled log-log SVG plot of a rate table: max-error markers, the
/// fitted line, and an optional reference-slope line anchored at the first
/// point. Plain text output, no renderer involved.
pub fn rate_table_svg(table: &RateTable, reference_slope: Option<f64>) -> String {
    let width = 640.0;
    let height = 480.0;
    let margin = 60.0;
    let pts: Vec<(f64, f64)> = table
        .rows
        .iter()
        .filter(|r| r.max_error > 0.0)
        .map(|r| {
            let x = match table.axis {
                FitAxis::SparsityV => r.v as f64,
                FitAxis::SampleCountM => r.m as f64,
            };
            (x.ln(), r.max_error.ln())
        })
        .collect();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n",
        w = width,
        h = height
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    if pts.is_empty() {
        svg.push_str("<text x=\"40\" y=\"40\">no positive errors to plot</text>\n</svg>\n");
        return svg;
    }
    let (mut x0, mut x1) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if (x1 - x0).abs() < 1e-9 {
        x1 = x0 + 1.0;
    }
    if (y1 - y0).abs() < 1e-9 {
        y1 = y0 + 1.0;
    }
    let pad_y = 0.08 * (y1 - y0);
    y0 -= pad_y;
    y1 += pad_y;
    let sx = |x: f64| margin + (x - x0) / (x1 - x0) * (width - 2.0 * margin);
    let sy = |y: f64| height - margin - (y - y0) / (y1 - y0) * (height - 2.0 * margin);

    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        margin,
        height - margin,
        width - margin,
        height - margin
    ));
    svg.push_str(&format!(
        "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        margin, margin, margin, height - margin
    ));
    let axis_label = match table.axis {
        FitAxis::SparsityV => "ln v",
        FitAxis::SampleCountM => "ln m",
    };
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\">{}</text>\n",
        width / 2.0 - 20.0,
        height - margin / 3.0,
        axis_label
    ));
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"14\" transform=\"rotate(-90 {:.2} {:.2})\">ln max error</text>\n",
        margin / 3.0,
        height / 2.0,
        margin / 3.0,
        height / 2.0
    ));

    for r in table.rows.iter().filter(|r| r.max_error > 0.0) {
        let xv = match table.axis {
            FitAxis::SparsityV => r.v as f64,
            FitAxis::SampleCountM => r.m as f64,
        };
        let px = sx(xv.ln());
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
            px,
            height - margin,
            px,
            height - margin + 5.0
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            px,
            height - margin + 18.0,
            xv
        ));
    }

    let path: Vec<String> = pts
        .iter()
        .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\"/>\n",
        path.join(" ")
    ));
    for &(x, y) in &pts {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.5\" fill=\"steelblue\"/>\n",
            sx(x),
            sy(y)
        ));
    }

    if let Some(fit) = &table.fit {
        let ya = fit.slope * x0 + fit.intercept;
        let yb = fit.slope * x1 + fit.intercept;
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"crimson\" stroke-dasharray=\"6 3\"/>\n",
            sx(x0),
            sy(ya),
            sx(x1),
            sy(yb)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"crimson\">fit slope {:.3}</text>\n",
            margin + 10.0,
            margin + 18.0,
            fit.slope
        ));
    }

    if let Some(slope) = reference_slope {
        let (ax, ay) = pts[0];
        let yb = ay + slope * (x1 - ax);
        svg.push_str(&format!(
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"2 4\"/>\n",
            sx(ax),
            sy(ay),
            sx(x1),
            sy(yb)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"13\" fill=\"gray\">reference slope {:.3}</text>\n",
            margin + 10.0,
            margin + 36.0,
            slope
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Wraps a report with enough context to reproduce it.
pub fn manifest_json(
    subcommand: &str,
    config_text: &str,
    seed: u64,
    outputs: &[String],
    extra: serde_json::Value,
) -> serde_json::Value {
    json!({
        "subcommand": subcommand,
        "config_hash": format!("{:016x}", fnv1a(config_text.as_bytes())),
        "seed": seed,
        "version": env!("CARGO_PKG_VERSION"),
        "outputs": outputs,
        "extra": extra,
    })
}

/// JSON form of a greedy trace (per-iteration records).
pub fn trace_json<T: Real>(
    trace: &crate::greedy::GreedyTrace<T>,
    system: &SampledSystem<T>,
) -> serde_json::Value {
    let iterations: Vec<serde_json::Value> = (0..trace.iterations())
        .map(|i| {
            json!({
                "selected": trace.selected[i],
                "selected_label": system.atom_label(trace.selected[i]),
                "functional_max": trace.functional_maxima[i].to_f64_lossy(),
                "residual_norm": trace.residual_norms[i + 1].to_f64_lossy(),
                "coefficients": trace.coefficients[i]
                    .iter()
                    .map(|a| json!([a.re.to_f64_lossy(), a.im.to_f64_lossy()]))
                    .collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "initial_norm": trace.residual_norms[0].to_f64_lossy(),
        "support": trace.support,
        "iterations": iterations,
        "stop": format!("{:?}", trace.stop),
        "projection_failure": trace.projection_failure.map(|(i, d)| json!([i, d])),
    })
}

/// JSON form of a class member: list of (frequency vector, re, im).
pub fn member_json<T: Real>(
    member: &CoefficientVector<T>,
    class: &ClassConfig,
) -> serde_json::Value {
    json!({
        "class": {
            "smoothness_r": class.smoothness_r,
            "beta": class.beta,
            "dim": class.dim,
        },
        "coefficients": coeffs_json(member),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            class: ClassConfig {
                smoothness_r: 1.0,
                beta: 1.0,
                dim: 1,
            },
            p: 2.0,
            v_grid: vec![4, 6],
            samples: SampleRule::Explicit { m: vec![60, 90] },
            dictionary: DictLevels::Fixed { level: 3 },
            members: vec![MemberSpec {
                density: 1e-9,
                level: 3,
                count: 3,
                slack: false,
            }],
            greedy: GreedyConfig {
                t: 1.0,
                iterations: IterationRule::ScaledV { c: 1.5 },
                stop_tol: 0.0,
                projection_tol: 1e-9,
                projection_max_iter: 500,
            },
            usd: UsdGateConfig {
                trials: 30,
                refine_cycles: 1,
                max_redraws: 3,
                sparsity_scale: 1.0,
            },
            seed: 11,
            sigma_oracle: true,
            linear: None,
        }
    }

    #[test]
    fn fit_rate_examples() {
        let vs: Vec<f64> = vec![4.0, 8.0, 16.0, 32.0, 64.0];
        let errs: Vec<f64> = vs.iter().map(|v| v.powf(-1.5)).collect();
        let fit = fit_rate(&vs, &errs).unwrap();
        assert!((fit.slope + 1.5).abs() < 1e-9);
        assert!(fit.residual < 1e-12);

        let flat: Vec<f64> = vec![0.7; 5];
        let fit = fit_rate(&vs, &flat).unwrap();
        assert!(fit.slope.abs() < 1e-12);

        let scaled: Vec<f64> = vs.iter().map(|v| 2.0 / v).collect();
        let fit = fit_rate(&vs, &scaled).unwrap();
        assert!((fit.slope + 1.0).abs() < 1e-12);
        assert!((fit.intercept - 2f64.ln()).abs() < 1e-12);

        // Zero errors are filtered; fewer than 4 surviving rows refuse.
        assert!(fit_rate(&vs[..4], &[0.0, 1.0, 0.5, 0.25]).is_err());
    }

    #[test]
    fn recovery_pipeline_recovers_exactly_sparse_members() {
        // Members with one frequency per level of a level-3 system are
        // 4-sparse; with ceil(1.5 v) iterations the WCGA nails them.
        let config = tiny_config();
        let table = recovery_pipeline::<f64>(&config).unwrap();
        assert_eq!(table.rows.len(), 2);
        for row in &table.rows {
            assert!(row.gate.certified, "gate failed: {:?}", row.gate);
            for &e in &row.errors {
                assert!(e <= 1e-7, "errors {:?}", row.errors);
            }
        }
    }

    #[test]
    fn recovery_pipeline_is_deterministic_and_monotone_in_members() {
        let config = tiny_config();
        let a = recovery_pipeline::<f64>(&config).unwrap();
        let b = recovery_pipeline::<f64>(&config).unwrap();
        assert_eq!(a, b);

        // Halving the member count keeps a prefix of the ensemble, so the
        // max error cannot increase.
        let mut halved = config.clone();
        halved.members[0].count = 1;
        let c = recovery_pipeline::<f64>(&halved).unwrap();
        for (full, half) in a.rows.iter().zip(&c.rows) {
            assert!(half.max_error <= full.max_error + 1e-15);
            assert_eq!(half.errors[..], full.errors[..1]);
        }
    }

    #[test]
    fn pipeline_error_never_exceeds_signal_norm_and_dominates_oracle() {
        let mut config = tiny_config();
        config.members[0].density = 1.0; // dense members: nonzero errors
        config.members[0].level = 5;
        let table = recovery_pipeline::<f64>(&config).unwrap();
        for (vi, row) in table.rows.iter().enumerate() {
            // Class members have l2 norm at most sqrt(sum 4^{-j}) < 2;
            // the zero approximant bounds the error by the norm.
            for &e in &row.errors {
                assert!(e <= 2.0 + 1e-9);
            }
            // Any u-term dictionary approximant is dominated by the best
            // u-term error; the reported sigma column (at the target v,
            // v <= u) is only a benchmark and may exceed the error.
            let system = TrigSystem::new(1, row.dict_level).unwrap();
            let members = cell_members::<f64>(&config, config.seed, vi as u64).unwrap();
            for (member, &e) in members.iter().zip(&row.errors) {
                let sigma_u = sigma_v_l2_analytic(member, &system, row.iterations);
                assert!(e >= sigma_u - 1e-9, "error {} below sigma_u {}", e, sigma_u);
            }
            if let Some(sigma) = row.sigma_oracle {
                assert!(sigma.is_finite() && sigma >= 0.0);
            }
        }
    }

    #[test]
    fn linear_baseline_handles_in_span_members_exactly() {
        let mut config = tiny_config();
        // All member content below frequency 8; m = 60 gives cutoff 15, so
        // members sit inside the linear subspace.
        config.v_grid = vec![4];
        config.samples = SampleRule::Explicit { m: vec![60] };
        config.members[0].level = 3;
        config.members[0].density = 1.0;
        config.linear = Some(LinearConfig::default());
        let table = linear_baseline::<f64>(&config).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert!(table.rows[0].gate.certified);
        for &e in &table.rows[0].errors {
            assert!(e <= 1e-8, "errors {:?}", table.rows[0].errors);
        }
    }

    #[test]
    fn linear_baseline_refuses_undersized_samples() {
        let mut config = tiny_config();
        config.v_grid = vec![4];
        config.samples = SampleRule::Explicit { m: vec![1] };
        assert!(matches!(
            linear_baseline::<f64>(&config),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn linear_baseline_requires_p_two() {
        let mut config = tiny_config();
        config.p = 1.5;
        assert!(linear_baseline::<f64>(&config).is_err());
    }

    #[test]
    fn univariate_solver_matches_dense_normal_equations() {
        let points = draw_random_points::<f64>(1, 40, 3).unwrap();
        let lin = LinearConfig::default();
        let cutoff = 4usize;
        let solver = LinearSolver::new(&points, 1, cutoff, &lin).unwrap();
        let mut coeffs = CoefficientVector::<f64>::new();
        coeffs.insert(FrequencyIndex(vec![0]), Complex::new(0.3, 0.0));
        coeffs.insert(FrequencyIndex(vec![2]), Complex::new(-0.4, 0.9));
        coeffs.insert(FrequencyIndex(vec![-3]), Complex::new(0.1, 0.2));
        let samples = eval_coeffs(&coeffs, &points);
        let (estimate, ridged) = solver.solve(&samples).unwrap();
        assert!(!ridged);
        // Band-limited signal within the cutoff: exact interpolation.
        for (k, a) in coeffs.iter() {
            assert!((estimate.get(k) - *a).norm() < 1e-7, "k={:?}", k.0);
        }

        // Cross-check against dense normal equations on the same data.
        let freqs = cube_frequencies(1, cutoff);
        let cols: Vec<Vec<Cplx<f64>>> = freqs
            .iter()
            .map(|k| crate::trig::atom_values(k, &points))
            .collect();
        let nd = freqs.len();
        let m_inv = 1.0 / points.count() as f64;
        let mut gram = vec![Complex::new(0.0, 0.0); nd * nd];
        let mut rhs = vec![Complex::new(0.0, 0.0); nd];
        for i in 0..nd {
            for j in 0..nd {
                let mut acc = Complex::new(0.0, 0.0);
                for (a, b) in cols[i].iter().zip(&cols[j]) {
                    acc += a.conj() * *b;
                }
                gram[i * nd + j] = acc * m_inv;
            }
            let mut acc = Complex::new(0.0, 0.0);
            for (g, f) in cols[i].iter().zip(&samples) {
                acc += g.conj() * *f;
            }
            rhs[i] = acc * m_inv;
        }
        let (dense, _) = solve_hpd(&gram, nd, &rhs).unwrap();
        for (k, c) in freqs.iter().zip(&dense) {
            assert!((estimate.get(k) - *c).norm() < 1e-7);
        }
    }

    #[test]
    fn lebesgue_ensemble_smoke() {
        let config = LebesgueConfig {
            dim: 1,
            dict_level: 2,
            p: 2.0,
            v: 2,
            m: 40,
            trials: 4,
            sparse_terms: 2,
            perturbation: 0.0,
            greedy: GreedyConfig {
                t: 1.0,
                iterations: IterationRule::ScaledV { c: 3.0 },
                stop_tol: 0.0,
                projection_tol: 1e-9,
                projection_max_iter: 500,
            },
            usd: UsdGateConfig {
                trials: 20,
                refine_cycles: 1,
                max_redraws: 3,
                sparsity_scale: 1.0,
            },
            seed: 5,
            oracle_cap: 200_000,
        };
        let table = lebesgue_ensemble::<f64>(&config).unwrap();
        assert_eq!(table.rows.len(), 4);
        // Exactly sparse signals solve to the exactness threshold.
        for row in &table.rows {
            assert!(row.exact, "row {:?}", row);
            assert!(row.wcga_over_sigma_sup.is_none());
        }

        // With a perturbation the ratios become finite and stay finite.
        let mut noisy = config;
        noisy.perturbation = 0.3;
        let table = lebesgue_ensemble::<f64>(&noisy).unwrap();
        for row in &table.rows {
            for r in [
                row.wcga_over_sigma_sup,
                row.wcga_over_sigma_mixed,
                row.bv_over_sigma_sup,
            ]
            .into_iter()
            .flatten()
            {
                assert!(r.is_finite());
            }
        }
    }

    #[test]
    fn svg_and_csv_emission_is_stable() {
        let config = tiny_config();
        let table = recovery_pipeline::<f64>(&config).unwrap();
        let svg1 = rate_table_svg(&table, Some(-1.5));
        let svg2 = rate_table_svg(&table, Some(-1.5));
        assert_eq!(svg1, svg2);
        assert!(svg1.starts_with("<svg"));
        let csv = rate_table_csv(&table);
        assert!(csv.lines().count() == table.rows.len() + 1);
        let json = rate_table_json(&table);
        assert!(json.get("rows").is_some());
    }
}
