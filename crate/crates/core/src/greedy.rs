//! The Weak Chebyshev Greedy Algorithm and its relatives: `L_p` span
//! projection (the Chebyshev step), the WCGA driver, iteration-budget
//! calculators, the blockwise v-term thresholding scheme, and brute-force
//! best v-term oracles.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::solve_hpd;
use crate::lp::{weighted_lp_norm, LpExponent, SampledFunction};
use crate::points::DiscreteMeasure;
use crate::scalar::Real;
use crate::tabulated::TabulatedSystem;
use crate::trig::{CoefficientVector, FrequencyIndex, TrigSystem};
use crate::Cplx;

/// Relative threshold below which a residual counts as exactly zero.
pub const ZERO_RESIDUAL_REL: f64 = 1e-13;

/// A dictionary restricted to the support of a discrete measure.
///
/// Trigonometric dictionaries keep their structure (atom values are derived
/// from the points on demand, with an incremental-phase fast path for the
/// functional sweep); tabulated dictionaries carry their value matrix.
#[derive(Debug, Clone)]
pub struct SampledSystem<T: Real> {
    measure: Arc<DiscreteMeasure<T>>,
    kind: Kind<T>,
}

#[derive(Debug, Clone)]
enum Kind<T: Real> {
    Trig {
        system: Arc<TrigSystem>,
        /// Canonical atom index of frequency `k` (univariate fast path),
        /// indexed by `k + max_frequency`.
        univariate_perm: Option<Vec<usize>>,
        /// Lazily computed Gram lags `τ_l = Σ_j e^{i l x_j}` for
        /// `l = -2K..=2K` (univariate), shared across runs on this system.
        lags: Arc<std::sync::OnceLock<Vec<Cplx<T>>>>,
    },
    Dense {
        atoms: Arc<Vec<Vec<Cplx<T>>>>,
    },
}

impl<T: Real> SampledSystem<T> {
    pub fn trig(system: Arc<TrigSystem>, measure: Arc<DiscreteMeasure<T>>) -> Result<Self> {
        if system.dim() != measure.support().dim() {
            return Err(Error::DimensionMismatch {
                context: "system/measure dimension",
                expected: system.dim(),
                got: measure.support().dim(),
            });
        }
        let univariate_perm = if system.dim() == 1 {
            let kmax = system.max_frequency() as i64;
            let mut perm = vec![0usize; (2 * kmax + 1) as usize];
            for (i, k) in system.frequencies().iter().enumerate() {
                perm[(k.0[0] + kmax) as usize] = i;
            }
            Some(perm)
        } else {
            None
        };
        Ok(Self {
            measure,
            kind: Kind::Trig {
                system,
                univariate_perm,
                lags: Arc::new(std::sync::OnceLock::new()),
            },
        })
    }

    pub fn dense(atoms: Vec<Vec<Cplx<T>>>, measure: Arc<DiscreteMeasure<T>>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("empty dictionary".into()));
        }
        for col in &atoms {
            if col.len() != measure.len() {
                return Err(Error::DimensionMismatch {
                    context: "atom values vs measure",
                    expected: measure.len(),
                    got: col.len(),
                });
            }
        }
        Ok(Self {
            measure,
            kind: Kind::Dense {
                atoms: Arc::new(atoms),
            },
        })
    }

    pub fn from_tabulated(
        tab: &TabulatedSystem<T>,
        measure: Arc<DiscreteMeasure<T>>,
    ) -> Result<Self> {
        Self::dense(tab.rows().to_vec(), measure)
    }

    pub fn n_atoms(&self) -> usize {
        match &self.kind {
            Kind::Trig { system, .. } => system.len(),
            Kind::Dense { atoms } => atoms.len(),
        }
    }

    pub fn measure(&self) -> &DiscreteMeasure<T> {
        &self.measure
    }

    pub fn measure_arc(&self) -> Arc<DiscreteMeasure<T>> {
        Arc::clone(&self.measure)
    }

    pub fn trig_system(&self) -> Option<&Arc<TrigSystem>> {
        match &self.kind {
            Kind::Trig { system, .. } => Some(system),
            Kind::Dense { .. } => None,
        }
    }

    /// Human-readable atom label for traces and reports.
    pub fn atom_label(&self, i: usize) -> String {
        match &self.kind {
            Kind::Trig { system, .. } => format!("{:?}", system.frequency(i).0),
            Kind::Dense { .. } => format!("{}", i),
        }
    }

    /// Values of atom `i` on the measure support.
    pub fn atom_column(&self, i: usize) -> Vec<Cplx<T>> {
        match &self.kind {
            Kind::Trig { system, .. } => {
                crate::trig::atom_values(system.frequency(i), self.measure.support())
            }
            Kind::Dense { atoms } => atoms[i].clone(),
        }
    }

    /// Turns per-atom coefficients into a frequency-indexed vector; only
    /// available for trigonometric dictionaries.
    pub fn coefficients_by_frequency(
        &self,
        support: &[usize],
        coeffs: &[Cplx<T>],
    ) -> Option<CoefficientVector<T>> {
        match &self.kind {
            Kind::Trig { system, .. } => Some(CoefficientVector::from_pairs(
                support
                    .iter()
                    .zip(coeffs)
                    .map(|(&i, &a)| (system.frequency(i).clone(), a)),
            )),
            Kind::Dense { .. } => None,
        }
    }

    /// `out[k] = Σ_ν h_ν g_k(ξ^ν)` for every atom `k`: one sweep of a
    /// linear functional with kernel `h` over the dictionary. This is the
    /// WCGA selection workhorse.
    pub fn functional_values(&self, h: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(h.len(), self.measure.len());
        match &self.kind {
            Kind::Trig {
                system,
                univariate_perm,
                ..
            } => match univariate_perm {
                Some(perm) => trig_sweep_univariate(system, self.measure.support(), h, perm),
                None => trig_sweep_general(system, self.measure.support(), h),
            },
            Kind::Dense { atoms } => {
                let atoms = Arc::clone(atoms);
                (0..atoms.len())
                    .into_par_iter()
                    .map(|i| {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for (hv, gv) in h.iter().zip(&atoms[i]) {
                            acc = acc + *hv * *gv;
                        }
                        acc
                    })
                    .collect()
            }
        }
    }
}

/// Univariate sweep: one incremental phase walk over the frequency range,
/// permuted into canonical atom order.
fn trig_sweep_univariate<T: Real>(
    system: &TrigSystem,
    points: &crate::points::PointSet<T>,
    h: &[Cplx<T>],
    perm: &[usize],
) -> Vec<Cplx<T>> {
    let kmax = system.max_frequency() as i64;
    let total = crate::trig::univariate_phase_sums(points, Some(h), kmax);
    let mut out = vec![Complex::new(T::zero(), T::zero()); system.len()];
    for (kk, val) in total.into_iter().enumerate() {
        out[perm[kk]] = val;
    }
    out
}

/// Multivariate sweep: per point, per-axis phase tables, then a product of
/// `d` lookups per atom.
fn trig_sweep_general<T: Real>(
    system: &TrigSystem,
    points: &crate::points::PointSet<T>,
    h: &[Cplx<T>],
) -> Vec<Cplx<T>> {
    let kmax = system.max_frequency() as i64;
    let span = (2 * kmax + 1) as usize;
    let dim = system.dim();
    let n = system.len();
    let m = points.count();
    let chunk = 256;
    let n_chunks = m.div_ceil(chunk);
    let partials: Vec<Vec<Cplx<T>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(m);
            let mut acc = vec![Complex::new(T::zero(), T::zero()); n];
            let mut tables = vec![vec![Complex::new(T::zero(), T::zero()); span]; dim];
            for j in lo..hi {
                let x = points.point(j);
                let hv = h[j];
                for (a, table) in tables.iter_mut().enumerate() {
                    let step = Complex::from_polar(T::one(), x[a]);
                    let mut phase = Complex::from_polar(T::one(), -T::of(kmax as f64) * x[a]);
                    for t in table.iter_mut() {
                        *t = phase;
                        phase = phase * step;
                    }
                }
                for (i, k) in system.frequencies().iter().enumerate() {
                    let mut g = hv;
                    for (a, &ka) in k.0.iter().enumerate() {
                        g = g * tables[a][(ka + kmax) as usize];
                    }
                    acc[i] = acc[i] + g;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex::new(T::zero(), T::zero()); n];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = *t + p;
        }
    }
    total
}

/// Norming-functional kernel of a residual: `h_ν` such that
/// `F_r(g) = Σ_ν h_ν g(ξ^ν)` with `F_r` the peak functional of `r` in
/// `L_p` of its measure. At `p = 1` the subgradient convention (zero where
/// the residual vanishes) is used.
pub fn functional_kernel<T: Real>(
    residual: &[Cplx<T>],
    weights: &[T],
    p: LpExponent<T>,
    residual_norm: T,
) -> Vec<Cplx<T>> {
    let pv = p.p();
    let two = T::of(2.0);
    if pv == two {
        let inv = T::one() / residual_norm;
        return residual
            .iter()
            .zip(weights)
            .map(|(z, &w)| z.conj() * (w * inv))
            .collect();
    }
    if pv == T::one() {
        return residual
            .iter()
            .zip(weights)
            .map(|(z, &w)| {
                let a = z.norm();
                if a > T::zero() {
                    z.conj() * (w / a)
                } else {
                    Complex::new(T::zero(), T::zero())
                }
            })
            .collect();
    }
    let scale = residual_norm.powf(T::one() - pv);
    let exponent = (pv - two) / two;
    residual
        .iter()
        .zip(weights)
        .map(|(z, &w)| {
            let a2 = z.norm_sqr();
            if a2 > T::zero() {
                z.conj() * (w * a2.powf(exponent) * scale)
            } else {
                Complex::new(T::zero(), T::zero())
            }
        })
        .collect()
}

/// Outcome of a Chebyshev step.
#[derive(Debug, Clone)]
pub struct Projection<T: Real> {
    /// Coefficients aligned with the index list passed in.
    pub coefficients: Vec<Cplx<T>>,
    pub residual: SampledFunction<T>,
    pub residual_norm: T,
    /// `max_i |F_res(g_i)|` over the projected indices.
    pub dual_residual: T,
    pub iterations: usize,
    pub converged: bool,
}

/// Best approximation to `f0` from the span of the chosen atoms in the
/// `L_p` norm of `f0`'s measure.
///
/// `p = 2` solves the weighted normal equations exactly. Other exponents
/// run damped iteratively-reweighted least squares (weight floor `1e-12`
/// relative to the data scale) with a golden-section fallback along the
/// IRLS direction, stopping when the dual residual satisfies
/// `max_i |F_res(g_i)| <= tol * ||res||_p * max_i ||g_i||_p`.
pub fn lp_span_projection<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    indices: &[usize],
    p: LpExponent<T>,
    tol: T,
    max_iter: usize,
) -> Result<Projection<T>> {
    let proj = project(f0, system, indices, p, tol, max_iter, None)?;
    if !proj.converged {
        return Err(Error::ProjectionDidNotConverge {
            dual_residual: proj.dual_residual.to_f64_lossy(),
            tol: tol.to_f64_lossy(),
            iterations: proj.iterations,
        });
    }
    Ok(proj)
}

fn project<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    indices: &[usize],
    p: LpExponent<T>,
    tol: T,
    max_iter: usize,
    warm_start: Option<&[Cplx<T>]>,
) -> Result<Projection<T>> {
    {
        let mut seen = std::collections::HashSet::new();
        for &i in indices {
            if i >= system.n_atoms() {
                return Err(Error::UnknownIndex(format!("atom {}", i)));
            }
            if !seen.insert(i) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate index {} in projection support",
                    i
                )));
            }
        }
    }
    if f0.len() != system.measure().len() {
        return Err(Error::DimensionMismatch {
            context: "function vs system measure",
            expected: system.measure().len(),
            got: f0.len(),
        });
    }
    let cols: Vec<Vec<Cplx<T>>> = indices.iter().map(|&i| system.atom_column(i)).collect();
    project_columns(f0, &cols, p, tol, max_iter, warm_start)
}

pub(crate) fn project_columns<T: Real>(
    f0: &SampledFunction<T>,
    cols: &[Vec<Cplx<T>>],
    p: LpExponent<T>,
    tol: T,
    max_iter: usize,
    warm_start: Option<&[Cplx<T>]>,
) -> Result<Projection<T>> {
    let weights = f0.measure().weights().to_vec();
    let s = cols.len();
    if s == 0 {
        let norm = weighted_lp_norm(f0.values(), &weights, p);
        return Ok(Projection {
            coefficients: Vec::new(),
            residual: f0.clone(),
            residual_norm: norm,
            dual_residual: T::zero(),
            iterations: 0,
            converged: true,
        });
    }

    let atom_norm_max = cols
        .iter()
        .map(|c| weighted_lp_norm(c, &weights, p))
        .fold(T::zero(), |a, b| a.max(b));
    let data_scale = f0
        .values()
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), |a, b| a.max(b))
        .max(T::of(1e-300));

    let residual_of = |c: &[Cplx<T>]| -> Vec<Cplx<T>> {
        let mut r = f0.values().to_vec();
        for (ci, col) in c.iter().zip(cols) {
            for (rv, gv) in r.iter_mut().zip(col) {
                *rv = *rv - *ci * *gv;
            }
        }
        r
    };

    // Weighted least squares with per-node weights `omega`.
    let wls = |omega: &[T]| -> Result<Vec<Cplx<T>>> {
        let mut gram = vec![Complex::new(T::zero(), T::zero()); s * s];
        let mut rhs = vec![Complex::new(T::zero(), T::zero()); s];
        for i in 0..s {
            for j in i..s {
                let mut acc = Complex::new(T::zero(), T::zero());
                for ((a, b), &om) in cols[i].iter().zip(&cols[j]).zip(omega) {
                    acc = acc + a.conj() * *b * om;
                }
                gram[i * s + j] = acc;
                gram[j * s + i] = acc.conj();
            }
            let mut acc = Complex::new(T::zero(), T::zero());
            for ((a, f), &om) in cols[i].iter().zip(f0.values()).zip(omega) {
                acc = acc + a.conj() * *f * om;
            }
            rhs[i] = acc;
        }
        Ok(solve_hpd(&gram, s, &rhs)?.0)
    };

    // Exact Hilbert-space path.
    if p.is_two() {
        let c = wls(&weights)?;
        let r = residual_of(&c);
        let rnorm = weighted_lp_norm(&r, &weights, p);
        let dual = dual_residual(&r, &weights, p, rnorm, cols);
        let residual = SampledFunction::new(r, f0.measure_arc())?;
        return Ok(Projection {
            coefficients: c,
            residual,
            residual_norm: rnorm,
            dual_residual: dual,
            iterations: 1,
            converged: true,
        });
    }

    let floor = data_scale * T::of(1e-12);
    let pm2 = p.p() - T::of(2.0);
    let mut c: Vec<Cplx<T>> = match warm_start {
        Some(ws) if ws.len() == s => ws.to_vec(),
        _ => wls(&weights)?, // start from the p = 2 projection
    };
    let mut r = residual_of(&c);
    let mut rnorm = weighted_lp_norm(&r, &weights, p);
    let mut iterations = 0;
    let mut converged = false;
    let mut dual = T::zero();

    while iterations < max_iter {
        iterations += 1;
        if rnorm <= data_scale * T::of(ZERO_RESIDUAL_REL) {
            converged = true;
            dual = T::zero();
            break;
        }
        dual = dual_residual(&r, &weights, p, rnorm, cols);
        if dual <= tol * rnorm * atom_norm_max {
            converged = true;
            break;
        }
        let omega: Vec<T> = r
            .iter()
            .zip(&weights)
            .map(|(z, &w)| w * z.norm().max(floor).powf(pm2))
            .collect();
        let target = wls(&omega)?;
        let dir: Vec<Cplx<T>> = target.iter().zip(&c).map(|(t, ci)| *t - *ci).collect();

        // Backtracking along the IRLS direction; golden-section rescue on
        // stagnation.
        let chosen_step: Option<T> = {
            let eval = |step: T| -> T {
                let cand: Vec<Cplx<T>> =
                    c.iter().zip(&dir).map(|(ci, di)| *ci + *di * step).collect();
                weighted_lp_norm(&residual_of(&cand), &weights, p)
            };
            let mut found = None;
            let mut step = T::one();
            for _ in 0..40 {
                if eval(step) < rnorm {
                    found = Some(step);
                    break;
                }
                step = step * T::of(0.5);
            }
            if found.is_none() {
                let (best_step, best_norm) = golden_section(&eval, T::zero(), T::one(), 48);
                if best_norm < rnorm {
                    found = Some(best_step);
                }
            }
            found
        };
        match chosen_step {
            Some(step) => {
                for (ci, di) in c.iter_mut().zip(&dir) {
                    *ci = *ci + *di * step;
                }
                r = residual_of(&c);
                rnorm = weighted_lp_norm(&r, &weights, p);
            }
            None => {
                // No direction of decrease left at this scale.
                dual = dual_residual(&r, &weights, p, rnorm, cols);
                converged = dual <= tol * rnorm * atom_norm_max;
                break;
            }
        }
    }
    if iterations >= max_iter && !converged {
        dual = dual_residual(&r, &weights, p, rnorm, cols);
        converged = dual <= tol * rnorm * atom_norm_max;
    }

    let residual = SampledFunction::new(r, f0.measure_arc())?;
    Ok(Projection {
        coefficients: c,
        residual,
        residual_norm: rnorm,
        dual_residual: dual,
        iterations,
        converged,
    })
}

fn dual_residual<T: Real>(
    r: &[Cplx<T>],
    weights: &[T],
    p: LpExponent<T>,
    rnorm: T,
    cols: &[Vec<Cplx<T>>],
) -> T {
    if rnorm <= T::zero() {
        return T::zero();
    }
    let h = functional_kernel(r, weights, p, rnorm);
    cols.iter()
        .map(|col| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (hv, gv) in h.iter().zip(col) {
                acc = acc + *hv * *gv;
            }
            acc.norm()
        })
        .fold(T::zero(), |a, b| a.max(b))
}

fn golden_section<T: Real>(f: &impl Fn(T) -> T, mut a: T, mut b: T, evals: usize) -> (T, T) {
    let inv_phi = T::of(0.618_033_988_749_894_9);
    let mut x1 = b - (b - a) * inv_phi;
    let mut x2 = a + (b - a) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..evals {
        if f1 < f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * inv_phi;
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * inv_phi;
            f2 = f(x2);
        }
    }
    if f1 < f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Why a WCGA run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxIterations,
    ResidualBelowTolerance,
    ZeroResidual,
    /// The norming functional vanished on the whole dictionary.
    FunctionalVanished,
    /// A Chebyshev step failed to converge; the trace is partial.
    ProjectionFailed,
}

/// Per-iteration record of a WCGA run.
#[derive(Debug, Clone)]
pub struct GreedyTrace<T: Real> {
    /// Atom chosen at each iteration (repeats are recorded, not re-added).
    pub selected: Vec<usize>,
    /// Distinct selected atoms in selection order.
    pub support: Vec<usize>,
    /// `sup_g |F_{f_{m-1}}(g)|` at each iteration.
    pub functional_maxima: Vec<T>,
    /// `||f_m||_p` for m = 0, 1, ...; one more entry than iterations.
    pub residual_norms: Vec<T>,
    /// Coefficients over `support` after each iteration.
    pub coefficients: Vec<Vec<Cplx<T>>>,
    pub stop: StopReason,
    /// Iteration index and dual residual of a failed Chebyshev step.
    pub projection_failure: Option<(usize, f64)>,
}

impl<T: Real> GreedyTrace<T> {
    pub fn iterations(&self) -> usize {
        self.selected.len()
    }

    pub fn final_coefficients(&self) -> &[Cplx<T>] {
        self.coefficients
            .last()
            .map(|c| c.as_slice())
            .unwrap_or(&[])
    }

    pub fn final_residual_norm(&self) -> T {
        *self.residual_norms.last().unwrap()
    }
}

/// Parameters of a WCGA run.
#[derive(Debug, Clone, Copy)]
pub struct WcgaParams<T: Real> {
    pub p: LpExponent<T>,
    /// Weakness parameter in (0, 1].
    pub t: T,
    pub max_iter: usize,
    /// Stop when `||f_m|| <= stop_tol * ||f0||` (0 disables).
    pub stop_tol: T,
    pub projection_tol: T,
    pub projection_max_iter: usize,
}

impl<T: Real> WcgaParams<T> {
    pub fn new(p: LpExponent<T>, t: T) -> Self {
        Self {
            p,
            t,
            max_iter: 100,
            stop_tol: T::zero(),
            projection_tol: T::of(1e-9),
            projection_max_iter: 500,
        }
    }
}

/// Runs the WCGA on `f0` with respect to a sampled dictionary.
///
/// Selection takes the functional-maximizing atom at `t = 1` and the first
/// atom in canonical order reaching the `t` threshold otherwise. Each
/// iteration re-projects `f0` onto the span of everything selected so far
/// (warm-started, so residual norms never increase beyond the projection
/// tolerance). `p = 1` is accepted and uses the subgradient functional; no
/// performance guarantees attach to it.
///
/// Univariate trigonometric dictionaries over a uniformly weighted measure
/// at `p = 2` run on Gram-lag algebra (selection in `O(N u)` per iteration
/// after one transform of the samples); the trace is the same up to
/// floating-point routing.
pub fn wcga_run<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    params: &WcgaParams<T>,
) -> Result<GreedyTrace<T>> {
    if !(params.t > T::zero() && params.t <= T::one()) {
        return Err(Error::InvalidParameter(format!(
            "weakness parameter must lie in (0,1], got {}",
            params.t
        )));
    }
    if f0.len() != system.measure().len() {
        return Err(Error::DimensionMismatch {
            context: "function vs system measure",
            expected: system.measure().len(),
            got: f0.len(),
        });
    }
    if params.p.is_two() && system.measure().is_uniform() {
        if let Kind::Trig {
            system: trig,
            univariate_perm: Some(perm),
            lags,
        } = &system.kind
        {
            return wcga_univariate_trig_p2(f0, system, trig, perm, lags, params);
        }
    }
    let weights = f0.measure().weights().to_vec();
    let p = params.p;
    let f0_norm = weighted_lp_norm(f0.values(), &weights, p);

    let mut trace = GreedyTrace {
        selected: Vec::new(),
        support: Vec::new(),
        functional_maxima: Vec::new(),
        residual_norms: vec![f0_norm],
        coefficients: Vec::new(),
        stop: StopReason::MaxIterations,
        projection_failure: None,
    };
    if f0_norm <= T::zero() {
        trace.stop = StopReason::ZeroResidual;
        return Ok(trace);
    }

    // Hilbert fast path state: selected columns plus growing Gram and rhs.
    let hilbert = p.is_two();
    let mut cols: Vec<Vec<Cplx<T>>> = Vec::new();
    let mut gram: Vec<Cplx<T>> = Vec::new();
    let mut rhs: Vec<Cplx<T>> = Vec::new();

    let mut residual = f0.values().to_vec();
    let mut rnorm = f0_norm;
    let mut coeffs: Vec<Cplx<T>> = Vec::new();

    for iter in 0..params.max_iter {
        if rnorm <= f0_norm * T::of(ZERO_RESIDUAL_REL) {
            trace.stop = StopReason::ZeroResidual;
            break;
        }
        if params.stop_tol > T::zero() && rnorm <= params.stop_tol * f0_norm {
            trace.stop = StopReason::ResidualBelowTolerance;
            break;
        }

        let h = functional_kernel(&residual, &weights, p, rnorm);
        let f_values = system.functional_values(&h);
        let mut best = T::zero();
        let mut best_idx = 0usize;
        for (i, fv) in f_values.iter().enumerate() {
            let a = fv.norm();
            if a > best {
                best = a;
                best_idx = i;
            }
        }
        trace.functional_maxima.push(best);
        if best <= T::zero() {
            trace.stop = StopReason::FunctionalVanished;
            break;
        }
        let chosen = if params.t >= T::one() {
            best_idx
        } else {
            let threshold = params.t * best;
            f_values
                .iter()
                .position(|fv| fv.norm() >= threshold)
                .unwrap_or(best_idx)
        };
        trace.selected.push(chosen);

        let is_new = !trace.support.contains(&chosen);
        if is_new {
            trace.support.push(chosen);
            let col = system.atom_column(chosen);
            if hilbert {
                // Extend the Gram matrix and right-hand side.
                let s_old = cols.len();
                let s_new = s_old + 1;
                let mut new_gram = vec![Complex::new(T::zero(), T::zero()); s_new * s_new];
                for i in 0..s_old {
                    for j in 0..s_old {
                        new_gram[i * s_new + j] = gram[i * s_old + j];
                    }
                }
                for i in 0..s_old {
                    let mut acc = Complex::new(T::zero(), T::zero());
                    for ((a, b), &w) in cols[i].iter().zip(&col).zip(&weights) {
                        acc = acc + a.conj() * *b * w;
                    }
                    new_gram[i * s_new + s_old] = acc;
                    new_gram[s_old * s_new + i] = acc.conj();
                }
                let mut diag = Complex::new(T::zero(), T::zero());
                let mut rhs_new = Complex::new(T::zero(), T::zero());
                for ((g, f), &w) in col.iter().zip(f0.values()).zip(&weights) {
                    diag = diag + g.conj() * *g * w;
                    rhs_new = rhs_new + g.conj() * *f * w;
                }
                new_gram[s_old * s_new + s_old] = diag;
                gram = new_gram;
                rhs.push(rhs_new);
            }
            cols.push(col);
        }

        if hilbert {
            let s = cols.len();
            let c = solve_hpd(&gram, s, &rhs)?.0;
            residual = f0.values().to_vec();
            for (ci, col) in c.iter().zip(&cols) {
                for (rv, gv) in residual.iter_mut().zip(col) {
                    *rv = *rv - *ci * *gv;
                }
            }
            rnorm = weighted_lp_norm(&residual, &weights, p);
            coeffs = c;
        } else {
            let warm: Vec<Cplx<T>> = if is_new {
                let mut w = coeffs.clone();
                w.push(Complex::new(T::zero(), T::zero()));
                w
            } else {
                coeffs.clone()
            };
            let proj = project_columns(
                f0,
                &cols,
                p,
                params.projection_tol,
                params.projection_max_iter,
                Some(&warm),
            )?;
            if !proj.converged {
                trace.projection_failure = Some((iter, proj.dual_residual.to_f64_lossy()));
                trace.coefficients.push(proj.coefficients.clone());
                trace.residual_norms.push(proj.residual_norm);
                trace.stop = StopReason::ProjectionFailed;
                return Ok(trace);
            }
            residual = proj.residual.values().to_vec();
            rnorm = proj.residual_norm;
            coeffs = proj.coefficients;
        }
        trace.coefficients.push(coeffs.clone());
        trace.residual_norms.push(rnorm);
    }
    Ok(trace)
}

/// Hilbert-space WCGA on a univariate trigonometric dictionary with
/// uniform weights, running entirely on Gram algebra: with
/// `τ_l = Σ_j e^{i l x_j}` and `b_k = Σ_j f0_j e^{-i k x_j}`, the selection
/// sweep is `corr_k = b_k - Σ_s c_s τ_{k_s - k}` and the projection is a
/// growing Cholesky factorization of the lag Gram matrix. The residual
/// norm updates as `||f0||^2 - ||y||^2`, which is monotone by construction.
fn wcga_univariate_trig_p2<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    trig: &Arc<TrigSystem>,
    perm: &[usize],
    lags_cell: &Arc<std::sync::OnceLock<Vec<Cplx<T>>>>,
    params: &WcgaParams<T>,
) -> Result<GreedyTrace<T>> {
    let points = system.measure().support();
    let m = points.count();
    let kmax = trig.max_frequency() as i64;
    let n = trig.len();
    let w = T::one() / T::of(m as f64);

    let lags = lags_cell
        .get_or_init(|| crate::trig::univariate_phase_sums(points, None, 2 * kmax));
    let tau = |l: i64| -> Cplx<T> { lags[(l + 2 * kmax) as usize] };
    // b_k = Σ_j f0_j e^{-ikx_j} = conj( Σ_j conj(f0_j) e^{+ikx_j} ).
    let conj_f0: Vec<Cplx<T>> = f0.values().iter().map(|z| z.conj()).collect();
    let b: Vec<Cplx<T>> = crate::trig::univariate_phase_sums(points, Some(&conj_f0), kmax)
        .into_iter()
        .map(|z| z.conj())
        .collect();
    // canonical atom index -> k offset.
    let mut kof = vec![0usize; n];
    for (koffset, &canon) in perm.iter().enumerate() {
        kof[canon] = koffset;
    }

    let f0_power: T = f0.values().iter().map(|z| z.norm_sqr()).sum();
    let f0_norm = (f0_power * w).sqrt();
    let mut trace = GreedyTrace {
        selected: Vec::new(),
        support: Vec::new(),
        functional_maxima: Vec::new(),
        residual_norms: vec![f0_norm],
        coefficients: Vec::new(),
        stop: StopReason::MaxIterations,
        projection_failure: None,
    };
    if f0_norm <= T::zero() {
        trace.stop = StopReason::ZeroResidual;
        return Ok(trace);
    }

    let mut support_k: Vec<i64> = Vec::new();
    let mut chol: Vec<Vec<Cplx<T>>> = Vec::new(); // row s: entries 0..=s, diag real
    let mut y: Vec<Cplx<T>> = Vec::new();
    let mut y_power = T::zero();
    let mut coeffs: Vec<Cplx<T>> = Vec::new();
    let mut rnorm = f0_norm;

    for _iter in 0..params.max_iter {
        if rnorm <= f0_norm * T::of(ZERO_RESIDUAL_REL) {
            trace.stop = StopReason::ZeroResidual;
            break;
        }
        if params.stop_tol > T::zero() && rnorm <= params.stop_tol * f0_norm {
            trace.stop = StopReason::ResidualBelowTolerance;
            break;
        }

        // corr_k = b_k - Σ_s c_s τ_{k_s - k}, k indexed by offset.
        let mut corr = b.clone();
        for (s, &ks) in support_k.iter().enumerate() {
            let cs = coeffs[s];
            if cs.re == T::zero() && cs.im == T::zero() {
                continue;
            }
            let base = ks + kmax;
            for (koffset, cv) in corr.iter_mut().enumerate() {
                *cv = *cv - cs * tau(base - koffset as i64);
            }
        }
        let mut best = T::zero();
        let mut best_canon = 0usize;
        for canon in 0..n {
            let a = corr[kof[canon]].norm();
            if a > best {
                best = a;
                best_canon = canon;
            }
        }
        trace.functional_maxima.push(best * w / rnorm);
        if best <= T::zero() {
            trace.stop = StopReason::FunctionalVanished;
            break;
        }
        let chosen = if params.t >= T::one() {
            best_canon
        } else {
            let threshold = params.t * best;
            (0..n)
                .find(|&canon| corr[kof[canon]].norm() >= threshold)
                .unwrap_or(best_canon)
        };
        trace.selected.push(chosen);
        let k_chosen = kof[chosen] as i64 - kmax;

        if !support_k.contains(&k_chosen) {
            // Extend the Cholesky factor with the new Gram column.
            let s_old = support_k.len();
            let mut lrow: Vec<Cplx<T>> = Vec::with_capacity(s_old + 1);
            for jj in 0..s_old {
                // H_{new,j} = τ_{k_j - k_new}.
                let mut sum = tau(support_k[jj] - k_chosen);
                for rr in 0..jj {
                    sum = sum - lrow[rr] * chol[jj][rr].conj();
                }
                sum = sum / chol[jj][jj];
                lrow.push(sum);
            }
            let l_sq: T = lrow.iter().map(|z| z.norm_sqr()).sum();
            let d2 = T::of(m as f64) - l_sq;
            if d2 > T::of(m as f64) * T::of(1e-13) {
                let d = d2.sqrt();
                let mut y_new = b[(k_chosen + kmax) as usize];
                for (lr, yr) in lrow.iter().zip(&y) {
                    y_new = y_new - *lr * *yr;
                }
                y_new = y_new / d;
                y_power = y_power + y_new.norm_sqr();
                y.push(y_new);
                lrow.push(Complex::new(d, T::zero()));
                chol.push(lrow);
                support_k.push(k_chosen);
                trace.support.push(chosen);
            }
            // A numerically dependent atom is recorded in `selected` but
            // does not extend the span.
        }

        // Back substitution: L^H c = y.
        let s = support_k.len();
        let mut c = vec![Complex::new(T::zero(), T::zero()); s];
        for i in (0..s).rev() {
            let mut sum = y[i];
            for j in i + 1..s {
                sum = sum - chol[j][i].conj() * c[j];
            }
            c[i] = sum / chol[i][i];
        }
        coeffs = c;
        rnorm = ((f0_power - y_power).max(T::zero()) * w).sqrt();
        if rnorm <= f0_norm * T::of(1e-6) {
            // The subtraction ||f0||^2 - ||y||^2 loses accuracy once the
            // residual is tiny; fall back to the direct evaluation (the
            // zero-residual stop fires right after, so this runs at most a
            // handful of times).
            let mut power = T::zero();
            for (j, f) in f0.values().iter().enumerate() {
                let x = points.point(j)[0];
                let mut r = *f;
                for (cs, &ks) in coeffs.iter().zip(&support_k) {
                    r = r - *cs * Complex::from_polar(T::one(), T::of(ks as f64) * x);
                }
                power = power + r.norm_sqr();
            }
            rnorm = (power * w).sqrt().min(rnorm);
        }
        trace.coefficients.push(coeffs.clone());
        trace.residual_norms.push(rnorm);
    }
    Ok(trace)
}

/// Inputs of the iteration-budget formulas.
#[derive(Debug, Clone, Copy)]
pub struct BudgetSpec<T: Real> {
    /// Weakness parameter of the WCGA run the budget is for.
    pub t: T,
    pub p: LpExponent<T>,
    /// Incoherence constant V.
    pub incoherence_v: T,
    /// Incoherence exponent r.
    pub incoherence_r: T,
    /// Unconditionality constant U (needed by [`BudgetMode::Unconditionality`]).
    pub unconditionality: Option<T>,
    /// Sparsity target v.
    pub v: usize,
    /// Scale constant `c` of the budget expressions (unspecified in the
    /// underlying theory; reported parametrically, defaults to 1).
    pub c: T,
    /// The constant `C(q)` inside `C(t, gamma, q)` (general mode only, default 1).
    pub c_q: T,
}

impl<T: Real> BudgetSpec<T> {
    pub fn new(t: T, p: LpExponent<T>, incoherence_v: T, incoherence_r: T, v: usize) -> Self {
        Self {
            t,
            p,
            incoherence_v,
            incoherence_r,
            unconditionality: None,
            v,
            c: T::one(),
            c_q: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BudgetMode {
    /// `u = ceil( C(t,gamma,q) V^{q'} ln(Vv) v^{r q'} )` with the modulus-of-
    /// smoothness data of L_p spelled out.
    GeneralSmoothness,
    /// `u = ceil( c (2V)^{q*} ln(2Vv) v^{r q*} )`: the incoherence-driven
    /// budget with the smoothness constants folded into `c`.
    Incoherence,
    /// `u = ceil( c (2V)^{q*} ln(3U+1) v^{r q*} )`: the unconditionality
    /// variant, trading the `ln(Vv)` factor for `ln(3U+1)`.
    Unconditionality,
}

#[derive(Debug, Clone, Copy)]
pub struct BudgetOutcome<T: Real> {
    pub u: usize,
    /// Raw value of the expression before the ceiling.
    pub raw: T,
    /// True when the expression was nonpositive and clamped up to 1.
    pub clamped: bool,
}

/// Number of WCGA iterations the Lebesgue-type bounds prescribe for a
/// sparsity target `v`. All unspecified absolute constants enter through
/// `spec.c`/`spec.c_q`; budgets are paper-shaped, not quantitative claims.
pub fn iteration_budget<T: Real>(
    spec: &BudgetSpec<T>,
    mode: BudgetMode,
) -> Result<BudgetOutcome<T>> {
    if spec.v == 0 {
        return Err(Error::InvalidParameter("budget needs v >= 1".into()));
    }
    if !(spec.t > T::zero() && spec.t <= T::one()) {
        return Err(Error::InvalidParameter(
            "weakness t must lie in (0,1]".into(),
        ));
    }
    let q_star = spec.p.q_star().ok_or_else(|| {
        Error::InvalidParameter("iteration budgets are undefined at p = 1".into())
    })?;
    let v = T::of(spec.v as f64);
    let big_v = spec.incoherence_v;
    let r = spec.incoherence_r;
    let raw = match mode {
        BudgetMode::GeneralSmoothness => {
            let pv = spec.p.p();
            let two = T::of(2.0);
            // Modulus-of-smoothness data for L_p: quadratic above 2,
            // order p below.
            let (q, gamma) = if pv >= two {
                (two, (pv - T::one()) / two)
            } else {
                (pv, T::one() / pv)
            };
            let q_prime = q / (q - T::one());
            let c_tgq = spec.c_q * gamma.powf(T::one() / (q - T::one())) * spec.t.powf(-q_prime);
            c_tgq * big_v.powf(q_prime) * (big_v * v).ln() * v.powf(r * q_prime)
        }
        BudgetMode::Incoherence => {
            let two_v = T::of(2.0) * big_v;
            spec.c * two_v.powf(q_star) * (two_v * v).ln() * v.powf(r * q_star)
        }
        BudgetMode::Unconditionality => {
            let u_const = spec.unconditionality.ok_or_else(|| {
                Error::InvalidParameter("the unconditionality budget needs a U constant".into())
            })?;
            let two_v = T::of(2.0) * big_v;
            spec.c
                * two_v.powf(q_star)
                * (T::of(3.0) * u_const + T::one()).ln()
                * v.powf(r * q_star)
        }
    };
    let ceil = raw.ceil();
    if ceil >= T::one() {
        Ok(BudgetOutcome {
            u: ceil.to_f64_lossy() as usize,
            raw,
            clamped: false,
        })
    } else {
        Ok(BudgetOutcome {
            u: 1,
            raw,
            clamped: true,
        })
    }
}

/// Output of the blockwise v-term scheme.
#[derive(Debug, Clone)]
pub struct BlockGreedyResult<T: Real> {
    /// The kept coefficients (the approximant).
    pub kept: CoefficientVector<T>,
    pub support: Vec<FrequencyIndex>,
    /// Certified error bound: `Σ_{j>n} (v_j+1)^{1-1/beta} 2^{-r j}` with
    /// unit system bound — per-block tail arithmetic plus the triangle
    /// inequality, valid whenever the input satisfies the class constraint.
    pub certified_error_bound: T,
    /// The same sum with exponent `1/p* - 1/beta`: the rate-shaped bound of
    /// the underlying theory (its absolute constant suppressed).
    pub rate_shape_bound: T,
    /// Base level n; everything at level <= n is kept. `None` when the
    /// budget is too small even for level 0.
    pub base_level: Option<usize>,
    /// Budgets `v_j` for `j = n..=cut_level` (starting at the base level).
    pub schedule: Vec<usize>,
    /// Level beyond which budgets vanish: `ceil(n d / alpha) + n + 1`.
    pub cut_level: usize,
}

/// Keeps all coefficients up to a base level `n` and the `v_j` largest in
/// each level above it, with level budgets `v_j = [2^{nd - alpha(j-n)}]`
/// and `alpha` chosen so `alpha (1/beta - 1/p*) = r/2`. Ties in modulus are
/// broken by canonical frequency order.
pub fn block_greedy_vterm<T: Real>(
    coeffs: &CoefficientVector<T>,
    v: usize,
    p: LpExponent<T>,
    beta: T,
    smoothness_r: T,
    dim: usize,
) -> Result<BlockGreedyResult<T>> {
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter("beta must lie in (0,1]".into()));
    }
    if smoothness_r <= T::zero() {
        return Err(Error::InvalidParameter(
            "smoothness r must be positive".into(),
        ));
    }
    if p.q_star().is_none() {
        return Err(Error::InvalidParameter("block scheme needs p > 1".into()));
    }
    let p_star = p.p_star();
    let gap = T::one() / beta - T::one() / p_star;
    if gap <= T::zero() {
        return Err(Error::InvalidParameter(
            "block scheme needs beta < min(p, 2)".into(),
        ));
    }
    let alpha = smoothness_r / (T::of(2.0) * gap);
    let d = T::of(dim as f64);
    // Budget sum constant: 2^d from the full base block plus the doubled
    // geometric tail.
    let c1 = T::of(2.0).powf(d) + T::of(2.0) / (T::of(2.0).powf(alpha) - T::one());

    let j_top = coeffs.max_level();
    let vt = T::of(v as f64);
    let base: Option<usize> = {
        let mut n: Option<usize> = None;
        let mut jj = 0usize;
        while c1 * T::of(2.0).powf(d * T::of(jj as f64)) <= vt {
            n = Some(jj);
            jj += 1;
            if jj > 64 {
                break;
            }
        }
        n
    };

    let budget_at = |j: usize| -> usize {
        // v_j = [2^{nd - alpha (j - n)}] relative to the base level; with no
        // base level the exponent starts below zero and every budget is 0.
        let (nd, off) = match base {
            Some(n) => (d * T::of(n as f64), T::of(j as f64) - T::of(n as f64)),
            None => (-d, T::of(j as f64) + T::one()),
        };
        let e = nd - alpha * off;
        let raw = T::of(2.0).powf(e);
        if raw < T::one() {
            0
        } else {
            raw.to_f64_lossy().floor() as usize
        }
    };
    let cut_level = match base {
        Some(n) => {
            let nd_over_alpha = (d * T::of(n as f64) / alpha).ceil().to_f64_lossy() as usize;
            nd_over_alpha + n + 1
        }
        None => 0,
    };

    let n_eff: isize = base.map(|n| n as isize).unwrap_or(-1);
    let mut kept = CoefficientVector::new();
    let one = T::one();
    let inv_beta = one / beta;
    let mut certified = T::zero();
    let mut rate_shape = T::zero();
    for j in 0..=j_top {
        let level_entries: Vec<(&FrequencyIndex, &Cplx<T>)> =
            coeffs.iter().filter(|(k, _)| k.level() == j).collect();
        if (j as isize) <= n_eff {
            for (k, a) in level_entries {
                kept.insert(k.clone(), *a);
            }
            continue;
        }
        let vj = budget_at(j);
        let mut sorted = level_entries;
        sorted.sort_by(|(ka, a), (kb, b)| {
            b.norm()
                .partial_cmp(&a.norm())
                .unwrap()
                .then_with(|| ka.cmp(kb))
        });
        for (k, a) in sorted.into_iter().take(vj) {
            kept.insert(k.clone(), *a);
        }
        let two_pow = T::of(2.0).powf(-smoothness_r * T::of(j as f64));
        let vj1 = T::of((vj + 1) as f64);
        certified = certified + vj1.powf(one - inv_beta) * two_pow;
        rate_shape = rate_shape + vj1.powf(one / p_star - inv_beta) * two_pow;
    }
    let support = kept.iter().map(|(k, _)| k.clone()).collect();
    let schedule = {
        let lo = base.unwrap_or(0);
        (lo..=cut_level.max(lo)).map(budget_at).collect()
    };
    Ok(BlockGreedyResult {
        kept,
        support,
        certified_error_bound: certified,
        rate_shape_bound: rate_shape,
        base_level: base,
        schedule,
        cut_level,
    })
}

/// `C(n, v)` without overflow (saturating at `u128::MAX`).
pub fn count_combinations(n: usize, v: usize) -> u128 {
    if v > n {
        return 0;
    }
    let v = v.min(n - v);
    let mut acc: u128 = 1;
    for i in 0..v {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Lexicographic enumeration of all v-subsets of 0..n.
pub fn combinations(n: usize, v: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if v > n {
        return out;
    }
    if v == 0 {
        out.push(Vec::new());
        return out;
    }
    let mut idx: Vec<usize> = (0..v).collect();
    loop {
        out.push(idx.clone());
        let mut i = v - 1;
        while idx[i] == i + n - v {
            if i == 0 {
                return out;
            }
            i -= 1;
        }
        idx[i] += 1;
        for j in i + 1..v {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Result of a brute-force best v-term search.
#[derive(Debug, Clone)]
pub struct SigmaResult<T: Real> {
    pub support: Vec<usize>,
    pub coefficients: Vec<Cplx<T>>,
    pub error: T,
}

/// Exact best v-term approximation error by support enumeration: every
/// size-v support is projected and the minimum taken (first support in
/// lexicographic order wins ties). The norm is the `L_p` norm of the
/// measure `f0` lives on, which may be an empirical, quadrature, or mixed
/// measure.
pub fn sigma_v_bruteforce<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    v: usize,
    p: LpExponent<T>,
    cap: u128,
) -> Result<SigmaResult<T>> {
    let n = system.n_atoms();
    if v > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {} exceeds dictionary size {}",
            v, n
        )));
    }
    let count = count_combinations(n, v);
    if count > cap {
        return Err(Error::CombinatorialCap { n, v, count, cap });
    }
    if v == 0 {
        let norm = weighted_lp_norm(f0.values(), f0.measure().weights(), p);
        return Ok(SigmaResult {
            support: Vec::new(),
            coefficients: Vec::new(),
            error: norm,
        });
    }
    let supports = combinations(n, v);
    let errors: Vec<T> = supports
        .par_iter()
        .map(|support| {
            project(f0, system, support, p, T::of(1e-10), 500, None)
                .expect("projection over enumerated support")
                .residual_norm
        })
        .collect();
    let mut best = (T::infinity(), usize::MAX);
    for (idx, err) in errors.into_iter().enumerate() {
        if err < best.0 {
            best = (err, idx);
        }
    }
    let support = supports[best.1].clone();
    let proj = project(f0, system, &support, p, T::of(1e-10), 500, None)?;
    Ok(SigmaResult {
        support,
        coefficients: proj.coefficients,
        error: proj.residual_norm,
    })
}

/// Best v-term recovery from samples alone: the brute-force optimum in the
/// empirical `L_p` norm of the sample set. The returned coefficients define
/// an approximant whose continuous error downstream code evaluates
/// separately; on the sample measure itself this coincides with
/// [`sigma_v_bruteforce`] by definition.
pub fn bv_best_vterm_recovery<T: Real>(
    samples: &SampledFunction<T>,
    system: &SampledSystem<T>,
    v: usize,
    p: LpExponent<T>,
    cap: u128,
) -> Result<SigmaResult<T>> {
    sigma_v_bruteforce(samples, system, v, p, cap)
}

/// Near-minimax best v-term search: per support the coefficients minimize a
/// high even exponent as a stand-in for the sup norm, and the reported error
/// is the genuine sup norm of that residual. The result is an upper bound
/// on the true minimax error, adequate for reported (not asserted) ratios.
pub fn sigma_v_sup_bruteforce<T: Real>(
    f0: &SampledFunction<T>,
    system: &SampledSystem<T>,
    v: usize,
    cap: u128,
) -> Result<SigmaResult<T>> {
    let n = system.n_atoms();
    if v > n {
        return Err(Error::InvalidParameter(format!(
            "sparsity {} exceeds dictionary size {}",
            v, n
        )));
    }
    let count = count_combinations(n, v);
    if count > cap {
        return Err(Error::CombinatorialCap { n, v, count, cap });
    }
    let sup = |vals: &[Cplx<T>]| -> T {
        vals.iter()
            .map(|z| z.norm())
            .fold(T::zero(), |a, b| a.max(b))
    };
    if v == 0 {
        return Ok(SigmaResult {
            support: Vec::new(),
            coefficients: Vec::new(),
            error: sup(f0.values()),
        });
    }
    let p_polya = LpExponent::new(T::of(32.0)).unwrap();
    let supports = combinations(n, v);
    let errors: Vec<T> = supports
        .par_iter()
        .map(|support| {
            let proj = project(f0, system, support, p_polya, T::of(1e-8), 300, None)
                .expect("projection over enumerated support");
            sup(proj.residual.values())
        })
        .collect();
    let mut best = (T::infinity(), usize::MAX);
    for (idx, err) in errors.into_iter().enumerate() {
        if err < best.0 {
            best = (err, idx);
        }
    }
    let support = supports[best.1].clone();
    let proj = project(f0, system, &support, p_polya, T::of(1e-8), 300, None)?;
    Ok(SigmaResult {
        support,
        coefficients: proj.coefficients,
        error: sup(proj.residual.values()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{draw_random_points, uniform_grid, DiscreteMeasure};
    use crate::rng::stream;
    use rand::Rng;

    fn p(v: f64) -> LpExponent<f64> {
        LpExponent::new(v).unwrap()
    }

    /// Trig system on a uniform grid wide enough for exact discrete
    /// orthonormality.
    fn orthonormal_setup(level: usize) -> (Arc<TrigSystem>, Arc<DiscreteMeasure<f64>>) {
        let sys = Arc::new(TrigSystem::new(1, level).unwrap());
        let grid = uniform_grid::<f64>(1, 4 * (sys.max_frequency() + 1)).unwrap();
        (sys, Arc::new(DiscreteMeasure::uniform(grid)))
    }

    fn random_sparse(
        sys: &TrigSystem,
        measure: &Arc<DiscreteMeasure<f64>>,
        nnz: usize,
        seed: u64,
    ) -> (SampledFunction<f64>, Vec<usize>, Vec<Cplx<f64>>) {
        let mut rng = stream(seed, "greedy-test", 0);
        let mut support: Vec<usize> = Vec::new();
        while support.len() < nnz {
            let i = rng.random_range(0..sys.len());
            if !support.contains(&i) {
                support.push(i);
            }
        }
        let coeffs: Vec<Cplx<f64>> = (0..nnz)
            .map(|_| {
                Complex::from_polar(
                    0.3 + rng.random::<f64>(),
                    rng.random::<f64>() * std::f64::consts::TAU,
                )
            })
            .collect();
        let mut values = vec![Complex::new(0.0, 0.0); measure.len()];
        for (&i, &c) in support.iter().zip(&coeffs) {
            let col = crate::trig::atom_values(sys.frequency(i), measure.support());
            for (v, g) in values.iter_mut().zip(col) {
                *v += c * g;
            }
        }
        (
            SampledFunction::new(values, Arc::clone(measure)).unwrap(),
            support,
            coeffs,
        )
    }

    #[test]
    fn projection_p2_orthonormal_gives_inner_products() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, support, coeffs) = random_sparse(&sys, &measure, 3, 11);
        let proj = lp_span_projection(&f0, &system, &support, p(2.0), 1e-10, 10).unwrap();
        for (got, want) in proj.coefficients.iter().zip(&coeffs) {
            assert!((got - want).norm() < 1e-12);
        }
        assert!(proj.residual_norm < 1e-12);
    }

    #[test]
    fn projection_recovers_span_members_any_p() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, support, _) = random_sparse(&sys, &measure, 3, 17);
        let norm0 = weighted_lp_norm(f0.values(), measure.weights(), p(2.0));
        for pv in [1.5, 2.0, 3.0] {
            let proj = lp_span_projection(&f0, &system, &support, p(pv), 1e-9, 500).unwrap();
            assert!(
                proj.residual_norm <= 1e-10 * norm0,
                "p={} residual {}",
                pv,
                proj.residual_norm
            );
        }
    }

    #[test]
    fn projection_p4_symmetric_scalar_case() {
        // f0 = (1,2,3) against the constant atom: the minimizer of
        // (|1-c|^4+|2-c|^4+|3-c|^4)/3 is c = 2 by symmetry.
        let pts = draw_random_points::<f64>(1, 3, 5).unwrap();
        let measure = Arc::new(DiscreteMeasure::uniform(pts));
        let f0 = SampledFunction::new(
            vec![
                Complex::new(1.0, 0.0),
                Complex::new(2.0, 0.0),
                Complex::new(3.0, 0.0),
            ],
            Arc::clone(&measure),
        )
        .unwrap();
        let system =
            SampledSystem::dense(vec![vec![Complex::new(1.0, 0.0); 3]], Arc::clone(&measure))
                .unwrap();
        let proj = lp_span_projection(&f0, &system, &[0], p(4.0), 1e-10, 500).unwrap();
        assert!(
            (proj.coefficients[0] - Complex::new(2.0, 0.0)).norm() < 1e-6,
            "got {:?}",
            proj.coefficients[0]
        );
    }

    #[test]
    fn projection_rejects_duplicate_indices() {
        let (sys, measure) = orthonormal_setup(2);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 2, 3);
        assert!(lp_span_projection(&f0, &system, &[1, 1], p(2.0), 1e-9, 10).is_err());
    }

    #[test]
    fn wcga_recovers_single_atom_first() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        for pv in [1.5, 2.0, 3.0] {
            let j = 9;
            let col = crate::trig::atom_values(sys.frequency(j), measure.support());
            let f0 = SampledFunction::new(
                col.iter().map(|g| *g * Complex::new(0.0, -1.3)).collect(),
                Arc::clone(&measure),
            )
            .unwrap();
            let mut params = WcgaParams::new(p(pv), 1.0);
            params.max_iter = 1;
            let trace = wcga_run(&f0, &system, &params).unwrap();
            assert_eq!(trace.selected, vec![j], "p={}", pv);
            assert!(trace.final_residual_norm() <= 1e-10 * trace.residual_norms[0]);
        }
    }

    #[test]
    fn wcga_p2_exact_sparse_recovery_in_v_iterations() {
        let (sys, measure) = orthonormal_setup(4);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        for trial in 0..20 {
            let v = 4;
            let (f0, mut support, _) = random_sparse(&sys, &measure, v, 100 + trial);
            let mut params = WcgaParams::new(p(2.0), 1.0);
            params.max_iter = v;
            let trace = wcga_run(&f0, &system, &params).unwrap();
            assert!(
                trace.final_residual_norm() <= 1e-8 * trace.residual_norms[0],
                "trial {}",
                trial
            );
            let mut got = trace.support.clone();
            got.sort_unstable();
            support.sort_unstable();
            assert_eq!(got, support);
        }
    }

    #[test]
    fn hilbert_lag_path_matches_the_generic_route() {
        // The same atoms presented as a dense tabulated system force the
        // generic projection path; traces must agree with the lag-algebra
        // fast path up to floating-point noise.
        let sys = Arc::new(TrigSystem::new(1, 3).unwrap());
        let pts = draw_random_points::<f64>(1, 45, 77).unwrap();
        let measure = Arc::new(DiscreteMeasure::uniform(pts));
        let fast = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let atoms: Vec<Vec<Cplx<f64>>> = (0..sys.len()).map(|i| fast.atom_column(i)).collect();
        let generic = SampledSystem::dense(atoms, Arc::clone(&measure)).unwrap();

        let mut rng = stream(50, "greedy-test", 2);
        let values: Vec<Cplx<f64>> = (0..measure.len())
            .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect();
        let f0 = SampledFunction::new(values, Arc::clone(&measure)).unwrap();
        let mut params = WcgaParams::new(p(2.0), 1.0);
        params.max_iter = 7;
        let a = wcga_run(&f0, &fast, &params).unwrap();
        let b = wcga_run(&f0, &generic, &params).unwrap();
        assert_eq!(a.selected, b.selected);
        assert_eq!(a.support, b.support);
        for (x, y) in a.residual_norms.iter().zip(&b.residual_norms) {
            assert!((x - y).abs() <= 1e-9 * (1.0 + y.abs()), "{} vs {}", x, y);
        }
        for (ca, cb) in a
            .final_coefficients()
            .iter()
            .zip(b.final_coefficients())
        {
            assert!((ca - cb).norm() < 1e-8);
        }
        for (fa, fb) in a.functional_maxima.iter().zip(&b.functional_maxima) {
            assert!((fa - fb).abs() <= 1e-9 * (1.0 + fb.abs()));
        }
    }

    #[test]
    fn wcga_residuals_never_increase() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let mut rng = stream(31, "greedy-test", 1);
        for pv in [1.5, 2.0, 3.0] {
            let values: Vec<Cplx<f64>> = (0..measure.len())
                .map(|_| Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                .collect();
            let f0 = SampledFunction::new(values, Arc::clone(&measure)).unwrap();
            let mut params = WcgaParams::new(p(pv), 1.0);
            params.max_iter = 8;
            let trace = wcga_run(&f0, &system, &params).unwrap();
            for w in trace.residual_norms.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12 * trace.residual_norms[0],
                    "p={} norms {:?}",
                    pv,
                    trace.residual_norms
                );
            }
        }
    }

    #[test]
    fn weak_selection_is_sound_and_takes_first_above_threshold() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 5, 77);
        let t = 0.7;
        let mut params = WcgaParams::new(p(2.0), t);
        params.max_iter = 5;
        let trace = wcga_run(&f0, &system, &params).unwrap();
        let weights = measure.weights().to_vec();
        let rnorm = trace.residual_norms[0];
        let h = functional_kernel(f0.values(), &weights, p(2.0), rnorm);
        let fv = system.functional_values(&h);
        let fmax = fv.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let chosen = trace.selected[0];
        assert!(fv[chosen].norm() >= t * fmax - 1e-12);
        let first = fv.iter().position(|z| z.norm() >= t * fmax).unwrap();
        assert_eq!(chosen, first);
    }

    #[test]
    fn wcga_accepts_p_one_with_the_subgradient_functional() {
        let (sys, measure) = orthonormal_setup(2);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 2, 91);
        let mut params = WcgaParams::new(p(1.0), 1.0);
        params.max_iter = 3;
        params.projection_tol = 1e-6;
        let trace = wcga_run(&f0, &system, &params).unwrap();
        assert!(trace.iterations() >= 1);
        for w in trace.residual_norms.windows(2) {
            assert!(w[1] <= w[0] + 1e-9 * trace.residual_norms[0]);
        }
    }

    #[test]
    fn budget_examples() {
        // Incoherence mode at p = 2: ceil(4 * ln 8 * 4) = 34.
        let spec = BudgetSpec::new(1.0, p(2.0), 1.0, 0.5, 4);
        let out = iteration_budget(&spec, BudgetMode::Incoherence).unwrap();
        assert_eq!(out.u, 34);
        assert!(!out.clamped);

        // Incoherence mode at p = 3/2 (q* = 3), r = 2/3: ceil(8 * ln 8 * 16) = 267.
        let spec = BudgetSpec::new(1.0, p(1.5), 1.0, 2.0 / 3.0, 4);
        let out = iteration_budget(&spec, BudgetMode::Incoherence).unwrap();
        assert_eq!(out.u, 267);

        // Degenerate log: v = 1, V = 1/2 makes ln(2Vv) = 0; clamped to 1.
        let spec = BudgetSpec::new(1.0, p(2.0), 0.5, 0.5, 1);
        let out = iteration_budget(&spec, BudgetMode::Incoherence).unwrap();
        assert_eq!(out.u, 1);
        assert!(out.clamped);

        // p = 1 is rejected.
        let spec = BudgetSpec::new(1.0, p(1.0), 1.0, 0.5, 4);
        assert!(iteration_budget(&spec, BudgetMode::Incoherence).is_err());

        // The unconditionality mode needs U.
        let spec = BudgetSpec::new(1.0, p(2.0), 1.0, 0.5, 4);
        assert!(iteration_budget(&spec, BudgetMode::Unconditionality).is_err());
        let mut spec = spec;
        spec.unconditionality = Some(1.0);
        let out = iteration_budget(&spec, BudgetMode::Unconditionality).unwrap();
        // ceil(4 * ln 4 * 4) = ceil(22.18) = 23.
        assert_eq!(out.u, 23);

        // General mode at p = 2: gamma = 1/2, q = 2, q' = 2:
        // u = ceil(0.5 * 1 * ln(4) * 4) = ceil(2.77) = 3.
        let spec = BudgetSpec::new(1.0, p(2.0), 1.0, 0.5, 4);
        let out = iteration_budget(&spec, BudgetMode::GeneralSmoothness).unwrap();
        assert_eq!(out.u, 3);
    }

    #[test]
    fn block_greedy_schedule_example() {
        // d=1, beta=1, p=2 make alpha = r; with r=1 and v=32 the base level
        // is 3 and the budgets from there read 8,4,2,1,0 with cut level 7.
        let mut coeffs = CoefficientVector::<f64>::new();
        for j in 0..=8usize {
            for (i, k) in crate::trig::level_frequencies(1, j).into_iter().enumerate() {
                let a = 2f64.powi(-(j as i32)) / (i + 1) as f64;
                coeffs.insert(k, Complex::new(a, 0.0));
            }
        }
        let out = block_greedy_vterm(&coeffs, 32, p(2.0), 1.0, 1.0, 1).unwrap();
        assert_eq!(out.base_level, Some(3));
        assert_eq!(out.cut_level, 7);
        assert_eq!(out.schedule, vec![8, 4, 2, 1, 0]);
        assert!(out.kept.len() <= 32);
    }

    #[test]
    fn block_greedy_keeps_everything_when_budget_allows() {
        let mut coeffs = CoefficientVector::<f64>::new();
        for j in 0..=2usize {
            for k in crate::trig::level_frequencies(1, j) {
                coeffs.insert(k, Complex::new(2f64.powi(-(j as i32)), 0.0));
            }
        }
        let out = block_greedy_vterm(&coeffs, 1000, p(2.0), 1.0, 1.0, 1).unwrap();
        assert_eq!(out.kept.len(), coeffs.len());
        assert_eq!(out.certified_error_bound, 0.0);
    }

    #[test]
    fn block_greedy_rejects_bad_parameters() {
        let coeffs = CoefficientVector::<f64>::new();
        assert!(block_greedy_vterm(&coeffs, 4, p(2.0), 0.0, 1.0, 1).is_err());
        assert!(block_greedy_vterm(&coeffs, 4, p(2.0), 1.0, -1.0, 1).is_err());
        assert!(block_greedy_vterm(&coeffs, 4, p(1.0), 1.0, 1.0, 1).is_err());
    }

    #[test]
    fn combinations_enumeration() {
        assert_eq!(count_combinations(5, 2), 10);
        assert_eq!(count_combinations(16, 3), 560);
        let combos = combinations(4, 2);
        assert_eq!(
            combos,
            vec![
                vec![0, 1],
                vec![0, 2],
                vec![0, 3],
                vec![1, 2],
                vec![1, 3],
                vec![2, 3]
            ]
        );
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
    }

    #[test]
    fn sigma_v_finds_exactly_sparse_functions() {
        let (sys, measure) = orthonormal_setup(2); // N = 7
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, mut support, _) = random_sparse(&sys, &measure, 2, 41);
        let out = sigma_v_bruteforce(&f0, &system, 2, p(2.0), 1 << 20).unwrap();
        assert!(out.error <= 1e-9);
        let mut got = out.support.clone();
        got.sort_unstable();
        support.sort_unstable();
        assert_eq!(got, support);

        // v = N reproduces anything in the dictionary span.
        let out = sigma_v_bruteforce(&f0, &system, sys.len(), p(2.0), 1 << 20).unwrap();
        assert!(out.error <= 1e-9);
    }

    #[test]
    fn sigma_v_orthonormal_keeps_largest_moduli() {
        let (sys, measure) = orthonormal_setup(2); // N = 7 atoms
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        // Coefficient moduli 5,4,3,2,1 across the first atoms.
        let mut values = vec![Complex::new(0.0, 0.0); measure.len()];
        let moduli = [5.0, 4.0, 3.0, 2.0, 1.0];
        for (i, &a) in moduli.iter().enumerate() {
            let col = crate::trig::atom_values(sys.frequency(i), measure.support());
            for (v, g) in values.iter_mut().zip(col) {
                *v += g * Complex::new(a, 0.0);
            }
        }
        let f0 = SampledFunction::new(values, Arc::clone(&measure)).unwrap();
        let out = sigma_v_bruteforce(&f0, &system, 2, p(2.0), 1 << 20).unwrap();
        let mut got = out.support.clone();
        got.sort_unstable();
        assert_eq!(got, vec![0, 1]);
        // Parseval tail: sqrt(3^2 + 2^2 + 1^2) = sqrt(14).
        assert!((out.error - 14f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn sigma_v_cap_is_enforced() {
        let (sys, measure) = orthonormal_setup(3);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 2, 3);
        let err = sigma_v_bruteforce(&f0, &system, 7, p(2.0), 100).unwrap_err();
        assert!(matches!(err, Error::CombinatorialCap { .. }));
    }

    #[test]
    fn bv_equals_sigma_on_the_same_discrete_measure() {
        let sys = Arc::new(TrigSystem::new(1, 2).unwrap());
        let pts = draw_random_points::<f64>(1, 40, 9).unwrap();
        let measure = Arc::new(DiscreteMeasure::uniform(pts));
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 3, 55);
        for pv in [1.5, 2.0] {
            let a = sigma_v_bruteforce(&f0, &system, 2, p(pv), 1 << 20).unwrap();
            let b = bv_best_vterm_recovery(&f0, &system, 2, p(pv), 1 << 20).unwrap();
            assert_eq!(a.support, b.support);
            assert_eq!(a.error, b.error);
        }
    }

    #[test]
    fn zero_term_approximation_is_the_norm() {
        let (sys, measure) = orthonormal_setup(2);
        let system = SampledSystem::trig(Arc::clone(&sys), Arc::clone(&measure)).unwrap();
        let (f0, _, _) = random_sparse(&sys, &measure, 2, 8);
        let out = sigma_v_bruteforce(&f0, &system, 0, p(2.0), 10).unwrap();
        let norm = weighted_lp_norm(f0.values(), measure.weights(), p(2.0));
        assert_eq!(out.error, norm);
    }
}
