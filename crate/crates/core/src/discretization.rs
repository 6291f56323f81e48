//! Universal sampling discretization machinery: sample-budget formulas,
//! randomized certificate search for the two-sided discretization property,
//! generalized restricted-isometry estimates, and incoherence /
//! unconditionality constants.
//!
//! All searches are suprema over randomly drawn, adversarially refined
//! candidates, so every estimate is a certified *lower* bound on the true
//! constant (and a discretization "pass" is an empirical certificate, not a
//! proof). Failures are reported, never raised.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::classes::gaussian;
use crate::error::{Error, Result};
use crate::greedy::SampledSystem;
use crate::lp::{weighted_lp_norm, LpExponent};
use crate::points::{DiscreteMeasure, PointSet};
use crate::rng::stream;
use crate::scalar::Real;
use crate::trig::{atom_values, CoefficientVector, TrigSystem};
use crate::Cplx;

/// Search effort knobs shared by the randomized certifiers.
#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub trials: usize,
    /// Coordinate-ascent sweeps per candidate (0 disables refinement).
    pub refine_cycles: usize,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(trials: usize, refine_cycles: usize, seed: u64) -> Self {
        Self {
            trials,
            refine_cycles,
            seed,
        }
    }
}

/// Sample-count formulas for the two discretization regimes.
///
/// For `p > 2`: `m = ceil( c eps^{-7} u^{p/2} (ln N)^2 )`.
/// For `p <= 2`: `m = ceil( c K u ln N (ln 2Ku)^2 (ln 2Ku + ln ln N) )`,
/// where `K` is the Bessel constant (`R1^{-2}` for a Riesz system).
/// The absolute constants are not specified by the underlying theory, so
/// `c` is configuration (default 1) and the result is a shaped budget, not
/// a guarantee. Logs are natural.
#[derive(Debug, Clone, Copy)]
pub struct SampleBudget {
    pub m: usize,
    /// True for the degenerate `u = 0` case.
    pub degenerate: bool,
}

pub fn sample_budget<T: Real>(
    p: LpExponent<T>,
    u: usize,
    n_dict: usize,
    bessel_k: T,
    epsilon: T,
    c: T,
) -> Result<SampleBudget> {
    if u > n_dict {
        return Err(Error::InvalidParameter(format!(
            "sparsity u = {} exceeds dictionary size N = {}",
            u, n_dict
        )));
    }
    if u == 0 {
        return Ok(SampleBudget {
            m: 0,
            degenerate: true,
        });
    }
    if n_dict < 3 {
        return Err(Error::InvalidParameter(
            "budget formulas need N >= 3".into(),
        ));
    }
    let pv = p.p().to_f64_lossy();
    let uf = u as f64;
    let ln_n = (n_dict as f64).ln();
    let cf = c.to_f64_lossy();
    let raw = if pv > 2.0 {
        let eps = epsilon.to_f64_lossy();
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::InvalidParameter(
                "epsilon must lie in (0,1) for the p > 2 budget".into(),
            ));
        }
        cf * eps.powi(-7) * uf.powf(pv / 2.0) * ln_n * ln_n
    } else {
        let k = bessel_k.to_f64_lossy();
        if k < 1.0 {
            return Err(Error::InvalidParameter(
                "Bessel constant K must be >= 1".into(),
            ));
        }
        let l2ku = (2.0 * k * uf).ln();
        cf * k * uf * ln_n * l2ku * l2ku * (l2ku + ln_n.ln())
    };
    Ok(SampleBudget {
        m: raw.ceil() as usize,
        degenerate: false,
    })
}

/// Report of a randomized universal-discretization certificate search.
#[derive(Debug, Clone)]
pub struct UsdReport<T: Real> {
    pub p: f64,
    pub sparsity: usize,
    pub trials_run: usize,
    /// Worst observed `(1/m) Σ |f(ξ^j)|^p / ||f||_p^p` from below / above.
    pub lower_ratio: T,
    pub upper_ratio: T,
    pub witness_low: CoefficientVector<T>,
    pub witness_high: CoefficientVector<T>,
    /// `lower_ratio >= 1/2` and `upper_ratio <= 3/2`.
    pub pass: bool,
}

impl<T: Real> UsdReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "p": self.p,
            "sparsity": self.sparsity,
            "trials": self.trials_run,
            "lower_ratio": self.lower_ratio.to_f64_lossy(),
            "upper_ratio": self.upper_ratio.to_f64_lossy(),
            "pass": self.pass,
            "witness_low": coeffs_json(&self.witness_low),
            "witness_high": coeffs_json(&self.witness_high),
        })
    }
}

pub(crate) fn coeffs_json<T: Real>(c: &CoefficientVector<T>) -> serde_json::Value {
    let items: Vec<serde_json::Value> = c
        .iter()
        .map(|(k, a)| {
            json!([
                k.0.clone(),
                a.re.to_f64_lossy(),
                a.im.to_f64_lossy(),
            ])
        })
        .collect();
    json!(items)
}

/// The discrete-over-continuous ratio `(Σ_j w_j |f(ξ^j)|^p) / ||f||_p^p`
/// for a trigonometric polynomial on a point set with uniform weights.
pub fn usd_ratio<T: Real>(
    system: &TrigSystem,
    points: &PointSet<T>,
    p: LpExponent<T>,
    coeffs: &CoefficientVector<T>,
) -> Result<T> {
    let cont = crate::trig::continuous_lp_norm(coeffs, p)?;
    if cont <= T::zero() {
        return Err(Error::InvalidParameter(
            "usd ratio of the zero polynomial".into(),
        ));
    }
    let values = system.evaluate(coeffs, points)?;
    let w = T::one() / T::of(points.count() as f64);
    let weights = vec![w; points.count()];
    let disc = weighted_lp_norm(&values, &weights, p);
    let pv = p.p();
    Ok((disc / cont).powf(pv))
}

/// One candidate of the ratio search: a sparse polynomial tabulated on the
/// sample points and, for `p != 2`, on the quadrature grid.
struct RatioProblem<T: Real> {
    sample_cols: Vec<Vec<Cplx<T>>>,
    sample_weight: T,
    /// None: Parseval (`p = 2`). Some: quadrature columns and weight.
    quad: Option<(Vec<Vec<Cplx<T>>>, T)>,
    p: LpExponent<T>,
}

impl<T: Real> RatioProblem<T> {
    fn new(
        system: &TrigSystem,
        points: &PointSet<T>,
        support: &[usize],
        p: LpExponent<T>,
        quad_points: Option<&PointSet<T>>,
    ) -> Self {
        let sample_cols: Vec<Vec<Cplx<T>>> = support
            .iter()
            .map(|&i| atom_values(system.frequency(i), points))
            .collect();
        let quad = quad_points.map(|qp| {
            let cols: Vec<Vec<Cplx<T>>> = support
                .iter()
                .map(|&i| atom_values(system.frequency(i), qp))
                .collect();
            (cols, T::one() / T::of(qp.count() as f64))
        });
        Self {
            sample_cols,
            sample_weight: T::one() / T::of(points.count() as f64),
            quad,
            p,
        }
    }

    fn power_on(cols: &[Vec<Cplx<T>>], w: T, c: &[Cplx<T>], p: LpExponent<T>) -> T {
        let m = cols[0].len();
        let pv = p.p();
        let half_p = pv / T::of(2.0);
        let mut acc = T::zero();
        for j in 0..m {
            let mut z = Complex::new(T::zero(), T::zero());
            for (ci, col) in c.iter().zip(cols) {
                z = z + *ci * col[j];
            }
            acc = acc + z.norm_sqr().powf(half_p);
        }
        acc * w
    }

    /// Discrete-to-continuous power ratio; None when the candidate is
    /// numerically zero.
    fn ratio(&self, c: &[Cplx<T>]) -> Option<T> {
        let cont = match &self.quad {
            None => c.iter().map(|z| z.norm_sqr()).sum::<T>(),
            Some((cols, w)) => Self::power_on(cols, *w, c, self.p),
        };
        if cont <= T::of(1e-60) {
            return None;
        }
        let disc = Self::power_on(&self.sample_cols, self.sample_weight, c, self.p);
        Some(disc / cont)
    }
}

/// Coordinate ascent over complex coefficients: per coordinate a 16-point
/// phase sweep (window shrinking by 4 per cycle) followed by golden-section
/// on the modulus. `objective` returns None for degenerate inputs.
pub(crate) fn refine_coefficients<T: Real>(
    start: &[Cplx<T>],
    objective: &dyn Fn(&[Cplx<T>]) -> Option<T>,
    maximize: bool,
    cycles: usize,
) -> (Vec<Cplx<T>>, T) {
    let score = |v: Option<T>| -> T {
        match v {
            Some(x) => {
                if maximize {
                    x
                } else {
                    -x
                }
            }
            None => T::neg_infinity(),
        }
    };
    let mut coeffs = start.to_vec();
    let mut best = score(objective(&coeffs));
    let typical = {
        let s: T = coeffs.iter().map(|z| z.norm()).sum();
        s / T::of(coeffs.len().max(1) as f64)
    };
    for cycle in 0..cycles {
        for i in 0..coeffs.len() {
            let current = coeffs[i];
            let (mut modulus, mut arg) = (current.norm(), current.arg());
            // Phase sweep.
            let width = T::TAU() / T::of(4f64.powi(cycle as i32));
            let mut best_arg = arg;
            for s in 0..16 {
                let cand_arg = arg + width * (T::of(s as f64) / T::of(16.0) - T::of(0.5));
                coeffs[i] = Complex::from_polar(modulus, cand_arg);
                let sc = score(objective(&coeffs));
                if sc > best {
                    best = sc;
                    best_arg = cand_arg;
                }
            }
            arg = best_arg;
            coeffs[i] = Complex::from_polar(modulus, arg);
            // Golden-section on the modulus.
            let hi = modulus * T::of(2.5) + typical * T::of(0.5);
            let (mut a, mut b) = (T::zero(), hi);
            let inv_phi = T::of(0.618_033_988_749_894_9);
            let eval_mod = |m: T, coeffs: &mut Vec<Cplx<T>>| -> T {
                coeffs[i] = Complex::from_polar(m, arg);
                score(objective(coeffs))
            };
            let mut x1 = b - (b - a) * inv_phi;
            let mut x2 = a + (b - a) * inv_phi;
            let mut f1 = eval_mod(x1, &mut coeffs);
            let mut f2 = eval_mod(x2, &mut coeffs);
            for _ in 0..20 {
                if f1 > f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - (b - a) * inv_phi;
                    f1 = eval_mod(x1, &mut coeffs);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + (b - a) * inv_phi;
                    f2 = eval_mod(x2, &mut coeffs);
                }
            }
            let (cand_mod, cand_val) = if f1 > f2 { (x1, f1) } else { (x2, f2) };
            if cand_val > best {
                best = cand_val;
                modulus = cand_mod;
            }
            coeffs[i] = Complex::from_polar(modulus, arg);
        }
    }
    let final_val = score(objective(&coeffs));
    if final_val > best {
        best = final_val;
    }
    (coeffs, if maximize { best } else { -best })
}

/// One candidate refined both ways: (low, support, coeffs, high, support, coeffs).
type RefinedExtremes<T> = (T, Vec<usize>, Vec<Cplx<T>>, T, Vec<usize>, Vec<Cplx<T>>);

fn draw_support<R: Rng>(rng: &mut R, n: usize, size: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..size {
        let pick = rng.random_range(i..n);
        pool.swap(i, pick);
    }
    pool.truncate(size);
    pool
}

fn gaussian_coeffs<T: Real, R: Rng>(rng: &mut R, len: usize) -> Vec<Cplx<T>> {
    (0..len)
        .map(|_| Complex::new(T::of(gaussian(rng)), T::of(gaussian(rng))))
        .collect()
}

/// Deterministic concentrated candidate: equal coefficients on a run of
/// consecutive frequencies along the first axis. Shared by the usd and
/// synthesis-rip searches so their candidate streams coincide.
fn consecutive_candidate<T: Real>(
    system: &TrigSystem,
    sparsity: usize,
) -> Option<(Vec<usize>, Vec<Cplx<T>>)> {
    let half = (sparsity as i64) / 2;
    let lo = -half;
    let mut support = Vec::new();
    for off in 0..sparsity as i64 {
        let mut k = vec![0i64; system.dim()];
        k[0] = lo + off;
        support.push(system.index_of(&crate::trig::FrequencyIndex(k))?);
    }
    Some((support, vec![Complex::new(T::one(), T::zero()); sparsity]))
}

/// Randomized certificate search for the two-sided discretization property
/// on the sparse spans of a trigonometric dictionary: random supports of
/// the given sparsity with Gaussian coefficients, each refined towards both
/// the smallest and the largest discrete-to-continuous ratio. Consecutive
/// frequency blocks (concentrated polynomials) are seeded deterministically
/// on top of the random trials.
pub fn verify_usd<T: Real>(
    system: &TrigSystem,
    points: &PointSet<T>,
    sparsity: usize,
    p: LpExponent<T>,
    cfg: &SearchConfig,
) -> Result<UsdReport<T>> {
    if sparsity == 0 || sparsity > system.len() {
        return Err(Error::InvalidParameter(format!(
            "usd sparsity must lie in 1..=N, got {}",
            sparsity
        )));
    }
    if points.dim() != system.dim() {
        return Err(Error::DimensionMismatch {
            context: "points vs system dimension",
            expected: system.dim(),
            got: points.dim(),
        });
    }
    let quad_points = if p.is_two() {
        None
    } else {
        Some(
            DiscreteMeasure::<T>::quadrature(system.dim(), system.max_frequency())?
                .support_arc(),
        )
    };

    let seeded: Vec<(Vec<usize>, Vec<Cplx<T>>)> =
        consecutive_candidate(system, sparsity).into_iter().collect();
    let total = cfg.trials + seeded.len();
    let outcomes: Vec<RefinedExtremes<T>> = (0..total)
        .into_par_iter()
        .map(|trial| {
            let (support, start) = if trial < seeded.len() {
                seeded[trial].clone()
            } else {
                let mut rng = stream(cfg.seed, "usd-candidate", (trial - seeded.len()) as u64);
                let support = draw_support(&mut rng, system.len(), sparsity);
                let coeffs = gaussian_coeffs::<T, _>(&mut rng, sparsity);
                (support, coeffs)
            };
            let problem = RatioProblem::new(system, points, &support, p, quad_points.as_deref());
            let objective = |c: &[Cplx<T>]| problem.ratio(c);
            let (c_low, low) =
                refine_coefficients(&start, &objective, false, cfg.refine_cycles);
            let (c_high, high) =
                refine_coefficients(&start, &objective, true, cfg.refine_cycles);
            (low, support.clone(), c_low, high, support, c_high)
        })
        .collect();

    let mut lower = T::infinity();
    let mut upper = T::neg_infinity();
    let mut wit_low = (Vec::new(), Vec::new());
    let mut wit_high = (Vec::new(), Vec::new());
    for (low, s_low, c_low, high, s_high, c_high) in outcomes {
        if low < lower {
            lower = low;
            wit_low = (s_low, c_low);
        }
        if high > upper {
            upper = high;
            wit_high = (s_high, c_high);
        }
    }

    let to_coeffs = |(support, coeffs): &(Vec<usize>, Vec<Cplx<T>>)| {
        CoefficientVector::from_pairs(
            support
                .iter()
                .zip(coeffs)
                .map(|(&i, &a)| (system.frequency(i).clone(), a)),
        )
    };
    let pass = lower >= T::of(0.5) && upper <= T::of(1.5);
    Ok(UsdReport {
        p: p.p().to_f64_lossy(),
        sparsity,
        trials_run: total,
        lower_ratio: lower,
        upper_ratio: upper,
        witness_low: to_coeffs(&wit_low),
        witness_high: to_coeffs(&wit_high),
        pass,
    })
}

/// The vector system associated to a dictionary and a point set: column `i`
/// is `m^{-1/p} (g_i(ξ^1), ..., g_i(ξ^m))`.
pub fn g_matrix<T: Real>(
    system: &TrigSystem,
    points: &PointSet<T>,
    p: LpExponent<T>,
) -> Vec<Vec<Cplx<T>>> {
    let scale = T::of(points.count() as f64).powf(-T::one() / p.p());
    system
        .frequencies()
        .iter()
        .map(|k| {
            atom_values(k, points)
                .into_iter()
                .map(|z| z * scale)
                .collect()
        })
        .collect()
}

/// Coefficient-space norm of the generalized restricted-isometry check.
pub enum RipNorm {
    /// Plain Euclidean norm of the coefficient vector.
    Euclidean,
    /// `||a|| = ||Σ a_i g_i||_{L_p}` for a trigonometric dictionary under
    /// normalized Lebesgue measure.
    TrigSynthesis { system: Arc<TrigSystem> },
}

/// Restricted-isometry estimate report.
#[derive(Debug, Clone)]
pub struct RipReport<T: Real> {
    /// Smallest delta consistent with the tested vectors.
    pub delta_estimate: T,
    pub v: usize,
    pub p: f64,
    pub norm_tag: String,
    pub lower_ratio: T,
    pub upper_ratio: T,
    /// Sparse witnesses as (column index, coefficient) lists.
    pub witness_low: Vec<(usize, Cplx<T>)>,
    pub witness_high: Vec<(usize, Cplx<T>)>,
    pub trials_run: usize,
}

impl<T: Real> RipReport<T> {
    pub fn to_json(&self) -> serde_json::Value {
        let wit = |w: &[(usize, Cplx<T>)]| -> serde_json::Value {
            json!(w
                .iter()
                .map(|(i, a)| json!([i, a.re.to_f64_lossy(), a.im.to_f64_lossy()]))
                .collect::<Vec<_>>())
        };
        json!({
            "delta_estimate": self.delta_estimate.to_f64_lossy(),
            "v": self.v,
            "p": self.p,
            "norm": self.norm_tag,
            "lower_ratio": self.lower_ratio.to_f64_lossy(),
            "upper_ratio": self.upper_ratio.to_f64_lossy(),
            "trials": self.trials_run,
            "witness_low": wit(&self.witness_low),
            "witness_high": wit(&self.witness_high),
        })
    }
}

fn lp_vec_norm<T: Real>(x: &[Cplx<T>], p: LpExponent<T>) -> T {
    let pv = p.p();
    if p.is_two() {
        return x.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt();
    }
    let half_p = pv / T::of(2.0);
    x.iter()
        .map(|z| z.norm_sqr().powf(half_p))
        .sum::<T>()
        .powf(T::one() / pv)
}

/// Estimates the smallest `delta` such that
/// `(1-delta) ||a|| <= ||U a||_{l_p^m} <= (1+delta) ||a||`
/// over tested v-sparse coefficient vectors. `columns` are the `N` columns
/// of `U` (each of length `m`). The same candidate streams as
/// [`verify_usd`] are used, so reports built from the same seed share
/// witnesses.
pub fn rip_check<T: Real>(
    columns: &[Vec<Cplx<T>>],
    norm: &RipNorm,
    p: LpExponent<T>,
    v: usize,
    cfg: &SearchConfig,
) -> Result<RipReport<T>> {
    let n = columns.len();
    if n == 0 || v == 0 || v > n {
        return Err(Error::InvalidParameter(
            "rip check needs 1 <= v <= N and a nonempty matrix".into(),
        ));
    }
    let quad_points = match norm {
        RipNorm::TrigSynthesis { system } if !p.is_two() => Some(
            DiscreteMeasure::<T>::quadrature(system.dim(), system.max_frequency())?
                .support_arc(),
        ),
        _ => None,
    };

    // Synthesis mode shares its candidate stream (including the seeded
    // concentrated candidate) with the usd search, so reports produced
    // from the same seed are bit-comparable on witnesses.
    let seeded: Vec<(Vec<usize>, Vec<Cplx<T>>)> = match norm {
        RipNorm::TrigSynthesis { system } => {
            consecutive_candidate(system, v).into_iter().collect()
        }
        RipNorm::Euclidean => Vec::new(),
    };
    let total = cfg.trials + seeded.len();
    let outcomes: Vec<RefinedExtremes<T>> = (0..total)
        .into_par_iter()
        .map(|trial| {
            let (support, start) = if trial < seeded.len() {
                seeded[trial].clone()
            } else {
                let mut rng =
                    stream(cfg.seed, "usd-candidate", (trial - seeded.len()) as u64);
                let support = draw_support(&mut rng, n, v);
                let start = gaussian_coeffs::<T, _>(&mut rng, v);
                (support, start)
            };
            let u_cols: Vec<&Vec<Cplx<T>>> = support.iter().map(|&i| &columns[i]).collect();
            let quad_cols: Option<Vec<Vec<Cplx<T>>>> = match (norm, quad_points.as_deref()) {
                (RipNorm::TrigSynthesis { system }, Some(qp)) => Some(
                    support
                        .iter()
                        .map(|&i| atom_values(system.frequency(i), qp))
                        .collect(),
                ),
                _ => None,
            };
            let coeff_norm = |c: &[Cplx<T>]| -> T {
                match norm {
                    RipNorm::Euclidean => c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt(),
                    RipNorm::TrigSynthesis { .. } => match &quad_cols {
                        None => c.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt(),
                        Some(cols) => {
                            let w = T::one() / T::of(cols[0].len() as f64);
                            RatioProblem::power_on(cols, w, c, p).powf(T::one() / p.p())
                        }
                    },
                }
            };
            let objective = |c: &[Cplx<T>]| -> Option<T> {
                let denom = coeff_norm(c);
                if denom <= T::of(1e-30) {
                    return None;
                }
                let m = u_cols[0].len();
                let mut ua = vec![Complex::new(T::zero(), T::zero()); m];
                for (ci, col) in c.iter().zip(&u_cols) {
                    for (o, g) in ua.iter_mut().zip(col.iter()) {
                        *o = *o + *ci * *g;
                    }
                }
                Some(lp_vec_norm(&ua, p) / denom)
            };
            let (c_low, low) = refine_coefficients(&start, &objective, false, cfg.refine_cycles);
            let (c_high, high) = refine_coefficients(&start, &objective, true, cfg.refine_cycles);
            (low, support.clone(), c_low, high, support, c_high)
        })
        .collect();

    let mut lower = T::infinity();
    let mut upper = T::neg_infinity();
    let mut wit_low = (Vec::new(), Vec::new());
    let mut wit_high = (Vec::new(), Vec::new());
    for (low, s_low, c_low, high, s_high, c_high) in outcomes {
        if low < lower {
            lower = low;
            wit_low = (s_low, c_low);
        }
        if high > upper {
            upper = high;
            wit_high = (s_high, c_high);
        }
    }
    let delta = (upper - T::one()).max(T::one() - lower).max(T::zero());
    let as_witness = |(s, c): (Vec<usize>, Vec<Cplx<T>>)| -> Vec<(usize, Cplx<T>)> {
        s.into_iter().zip(c).collect()
    };
    Ok(RipReport {
        delta_estimate: delta,
        v,
        p: p.p().to_f64_lossy(),
        norm_tag: match norm {
            RipNorm::Euclidean => "euclidean".into(),
            RipNorm::TrigSynthesis { .. } => "synthesis".into(),
        },
        lower_ratio: lower,
        upper_ratio: upper,
        witness_low: as_witness(wit_low),
        witness_high: as_witness(wit_high),
        trials_run: total,
    })
}

/// Norm context for incoherence / unconditionality searches.
pub enum SystemNorm<T: Real> {
    /// Continuous norm of a trigonometric dictionary under normalized
    /// Lebesgue measure (Parseval at `p = 2`, quadrature otherwise).
    ContinuousTrig {
        system: Arc<TrigSystem>,
        p: LpExponent<T>,
    },
    /// `L_p` of whatever measure the sampled system carries (empirical,
    /// quadrature, or mixed).
    OnMeasure {
        system: SampledSystem<T>,
        p: LpExponent<T>,
    },
}

impl<T: Real> SystemNorm<T> {
    fn n_atoms(&self) -> usize {
        match self {
            SystemNorm::ContinuousTrig { system, .. } => system.len(),
            SystemNorm::OnMeasure { system, .. } => system.n_atoms(),
        }
    }

    /// Per-support norm evaluator; returns columns/weights so repeated
    /// probes stay cheap.
    fn evaluator(&self, support: &[usize]) -> Result<SupportNorm<T>> {
        match self {
            SystemNorm::ContinuousTrig { system, p } => {
                if p.is_two() {
                    Ok(SupportNorm::Parseval)
                } else {
                    let qp = DiscreteMeasure::<T>::quadrature(
                        system.dim(),
                        system.max_frequency(),
                    )?;
                    let cols = support
                        .iter()
                        .map(|&i| atom_values(system.frequency(i), qp.support()))
                        .collect::<Vec<_>>();
                    Ok(SupportNorm::Columns {
                        weights: qp.weights().to_vec(),
                        cols,
                        p: *p,
                    })
                }
            }
            SystemNorm::OnMeasure { system, p } => {
                let cols = support
                    .iter()
                    .map(|&i| system.atom_column(i))
                    .collect::<Vec<_>>();
                Ok(SupportNorm::Columns {
                    weights: system.measure().weights().to_vec(),
                    cols,
                    p: *p,
                })
            }
        }
    }
}

enum SupportNorm<T: Real> {
    Parseval,
    Columns {
        weights: Vec<T>,
        cols: Vec<Vec<Cplx<T>>>,
        p: LpExponent<T>,
    },
}

impl<T: Real> SupportNorm<T> {
    /// Norm of `Σ c_i g_i` over the masked coordinates.
    fn norm(&self, c: &[Cplx<T>], mask: Option<&[bool]>) -> T {
        match self {
            SupportNorm::Parseval => c
                .iter()
                .enumerate()
                .filter(|(i, _)| mask.map(|m| m[*i]).unwrap_or(true))
                .map(|(_, z)| z.norm_sqr())
                .sum::<T>()
                .sqrt(),
            SupportNorm::Columns { weights, cols, p } => {
                let m = weights.len();
                let mut vals = vec![Complex::new(T::zero(), T::zero()); m];
                for (i, (ci, col)) in c.iter().zip(cols).enumerate() {
                    if mask.map(|m| m[i]).unwrap_or(true) {
                        for (v, g) in vals.iter_mut().zip(col) {
                            *v = *v + *ci * *g;
                        }
                    }
                }
                weighted_lp_norm(&vals, weights, *p)
            }
        }
    }
}

/// Lower bound on the incoherence constant `V` of the system: the supremum
/// of `Σ_{i in A} |c_i| / (|A|^r ||Σ_{i in B} c_i g_i||)` over random nested
/// supports `A ⊂ B, |A| <= v, |B| <= S` with refined coefficients. An
/// equal-modulus witness on `A = B` of size `v` is always included.
#[derive(Debug, Clone)]
pub struct IncoherenceEstimate<T: Real> {
    pub v_estimate: T,
    pub exponent_r: f64,
    pub v: usize,
    pub s: usize,
    pub witness_support: Vec<usize>,
    pub witness_a_size: usize,
    pub witness_coeffs: Vec<Cplx<T>>,
    pub trials_run: usize,
}

impl<T: Real> IncoherenceEstimate<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "v_estimate": self.v_estimate.to_f64_lossy(),
            "r": self.exponent_r,
            "v": self.v,
            "s": self.s,
            "trials": self.trials_run,
            "witness_support": self.witness_support,
            "witness_a_size": self.witness_a_size,
            "witness_coeffs": self.witness_coeffs.iter()
                .map(|a| json!([a.re.to_f64_lossy(), a.im.to_f64_lossy()]))
                .collect::<Vec<_>>(),
        })
    }
}

pub fn incoherence_estimate<T: Real>(
    norm: &SystemNorm<T>,
    v: usize,
    s: usize,
    exponent_r: T,
    cfg: &SearchConfig,
) -> Result<IncoherenceEstimate<T>> {
    let n = norm.n_atoms();
    if !(1 <= v && v <= s && s <= n) {
        return Err(Error::InvalidParameter(
            "incoherence needs 1 <= v <= S <= N".into(),
        ));
    }
    // Trial 0 is the deterministic equal-modulus witness on A = B, |A| = v.
    let total = cfg.trials + 1;
    let outcomes: Vec<(T, Vec<usize>, usize, Vec<Cplx<T>>)> = (0..total)
        .into_par_iter()
        .map(|trial| -> Result<(T, Vec<usize>, usize, Vec<Cplx<T>>)> {
            let (support, a_size, start) = if trial == 0 {
                let support: Vec<usize> = (0..v).collect();
                (support, v, vec![Complex::new(T::one(), T::zero()); v])
            } else {
                let mut rng = stream(cfg.seed, "incoherence", (trial - 1) as u64);
                let b_size = rng.random_range(v..=s);
                let a_size = rng.random_range(1..=v.min(b_size));
                let support = draw_support(&mut rng, n, b_size);
                let start = gaussian_coeffs::<T, _>(&mut rng, b_size);
                (support, a_size, start)
            };
            let eval = norm.evaluator(&support)?;
            let a_card = T::of(a_size as f64);
            let objective = |c: &[Cplx<T>]| -> Option<T> {
                let denom = eval.norm(c, None);
                if denom <= T::of(1e-30) {
                    return None;
                }
                let num: T = c[..a_size].iter().map(|z| z.norm()).sum();
                Some(num / (a_card.powf(exponent_r) * denom))
            };
            let (coeffs, value) =
                refine_coefficients(&start, &objective, true, cfg.refine_cycles);
            Ok((value, support, a_size, coeffs))
        })
        .collect::<Result<_>>()?;

    let mut best = (T::neg_infinity(), 0usize);
    for (i, (value, _, _, _)) in outcomes.iter().enumerate() {
        if *value > best.0 {
            best = (*value, i);
        }
    }
    let (value, support, a_size, coeffs) = outcomes.into_iter().nth(best.1).unwrap();
    Ok(IncoherenceEstimate {
        v_estimate: value,
        exponent_r: exponent_r.to_f64_lossy(),
        v,
        s,
        witness_support: support,
        witness_a_size: a_size,
        witness_coeffs: coeffs,
        trials_run: total,
    })
}

/// Lower bound on the unconditionality constant `U`: the supremum of
/// `||Σ_A c_i g_i|| / ||Σ_B c_i g_i||` over random nested `A ⊂ B` with
/// refined coefficients.
#[derive(Debug, Clone)]
pub struct UnconditionalityEstimate<T: Real> {
    pub u_estimate: T,
    pub v: usize,
    pub s: usize,
    pub witness_support: Vec<usize>,
    pub witness_a_size: usize,
    pub witness_coeffs: Vec<Cplx<T>>,
    pub trials_run: usize,
}

impl<T: Real> UnconditionalityEstimate<T> {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "u_estimate": self.u_estimate.to_f64_lossy(),
            "v": self.v,
            "s": self.s,
            "trials": self.trials_run,
            "witness_support": self.witness_support,
            "witness_a_size": self.witness_a_size,
        })
    }
}

pub fn unconditionality_estimate<T: Real>(
    norm: &SystemNorm<T>,
    v: usize,
    s: usize,
    cfg: &SearchConfig,
) -> Result<UnconditionalityEstimate<T>> {
    let n = norm.n_atoms();
    if !(1 <= v && v <= s && s <= n) {
        return Err(Error::InvalidParameter(
            "unconditionality needs 1 <= v <= S <= N".into(),
        ));
    }
    let outcomes: Vec<(T, Vec<usize>, usize, Vec<Cplx<T>>)> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<(T, Vec<usize>, usize, Vec<Cplx<T>>)> {
            let mut rng = stream(cfg.seed, "unconditionality", trial as u64);
            let b_size = rng.random_range(v.max(2)..=s.max(v.max(2)));
            let a_size = rng.random_range(1..=v.min(b_size));
            let support = draw_support(&mut rng, n, b_size);
            let start = gaussian_coeffs::<T, _>(&mut rng, b_size);
            let eval = norm.evaluator(&support)?;
            let mask: Vec<bool> = (0..b_size).map(|i| i < a_size).collect();
            let objective = |c: &[Cplx<T>]| -> Option<T> {
                let denom = eval.norm(c, None);
                if denom <= T::of(1e-30) {
                    return None;
                }
                Some(eval.norm(c, Some(&mask)) / denom)
            };
            let (coeffs, value) =
                refine_coefficients(&start, &objective, true, cfg.refine_cycles);
            Ok((value, support, a_size, coeffs))
        })
        .collect::<Result<_>>()?;
    let mut best = (T::neg_infinity(), 0usize);
    for (i, (value, _, _, _)) in outcomes.iter().enumerate() {
        if *value > best.0 {
            best = (*value, i);
        }
    }
    let (value, support, a_size, coeffs) = outcomes.into_iter().nth(best.1).unwrap();
    Ok(UnconditionalityEstimate {
        u_estimate: value,
        v,
        s,
        witness_support: support,
        witness_a_size: a_size,
        witness_coeffs: coeffs,
        trials_run: cfg.trials,
    })
}
