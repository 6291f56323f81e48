//! Coefficient classes with dyadic-block decay: generators, membership
//! checks, tail bounds, and related certified inequalities.
//!
//! A coefficient vector belongs to the class with smoothness `r` and block
//! exponent `beta` when every dyadic level satisfies
//! `(Σ_{level j} |a_k|^beta)^{1/beta} <= 2^{-r j}`.

use num_complex::Complex;
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::orthonormalize_rows;
use crate::lp::LpExponent;
use crate::rng::stream;
use crate::scalar::Real;
use crate::trig::{block_norms, continuous_lp_norm, level_frequencies, level_size, CoefficientVector};
use crate::Cplx;

/// Class parameters.
#[derive(Debug, Clone, Copy)]
pub struct ClassSpec<T: Real> {
    pub smoothness_r: T,
    pub beta: T,
    pub dim: usize,
    /// Uniform bound of the underlying system elements.
    pub system_bound: T,
}

impl<T: Real> ClassSpec<T> {
    pub fn new(smoothness_r: T, beta: T, dim: usize) -> Result<Self> {
        if smoothness_r <= T::zero() {
            return Err(Error::InvalidParameter("smoothness r must be positive".into()));
        }
        if !(beta > T::zero() && beta <= T::one()) {
            return Err(Error::InvalidParameter("beta must lie in (0,1]".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        Ok(Self {
            smoothness_r,
            beta,
            dim,
            system_bound: T::one(),
        })
    }

    /// Block budget `2^{-r j}`.
    pub fn level_cap(&self, j: usize) -> T {
        T::of(2.0).powf(-self.smoothness_r * T::of(j as f64))
    }
}

/// How member moduli are normalized per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberMode {
    /// Block norms sit exactly on the class boundary `2^{-rj}`.
    Extremal,
    /// Block norms are scaled by an extra uniform(0,1] factor.
    Slack,
}

/// Draws a class member up to level `J`: each level gets
/// `ceil(density * |level|)` random frequencies, random phases, moduli
/// log-uniform over two decades, then the level is rescaled so its
/// `l_beta` norm hits the cap (times a slack factor in slack mode).
/// Deterministic under (seed, counter).
pub fn sample_member<T: Real>(
    spec: &ClassSpec<T>,
    max_level: usize,
    density: f64,
    mode: MemberMode,
    seed: u64,
    counter: u64,
) -> Result<CoefficientVector<T>> {
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter("density must lie in (0,1]".into()));
    }
    let mut rng = stream(seed, "class-member", counter);
    let mut out = CoefficientVector::new();
    for j in 0..=max_level {
        let size = level_size(spec.dim, j);
        let take = ((density * size as f64).ceil() as usize).clamp(1, size);
        // Partial Fisher-Yates over the level's canonical enumeration.
        let mut pool: Vec<usize> = (0..size).collect();
        let freqs = level_frequencies(spec.dim, j);
        let mut chosen = Vec::with_capacity(take);
        for i in 0..take {
            let pick = rng.random_range(i..size);
            pool.swap(i, pick);
            chosen.push(pool[i]);
        }
        let mut entries: Vec<(usize, Cplx<T>)> = chosen
            .into_iter()
            .map(|idx| {
                // Two decades of moduli ahead of rescaling, so levels mix
                // dominant and small coefficients.
                let modulus = T::of(10f64.powf(rng.random::<f64>() * 2.0 - 2.0));
                let phase = T::of(rng.random::<f64>() * std::f64::consts::TAU);
                (idx, Complex::from_polar(modulus, phase))
            })
            .collect();
        let beta = spec.beta;
        let norm_beta: T = entries
            .iter()
            .map(|(_, a)| a.norm().powf(beta))
            .sum::<T>()
            .powf(T::one() / beta);
        let mut target = spec.level_cap(j);
        if mode == MemberMode::Slack {
            let slack: f64 = rng.random::<f64>();
            // uniform over (0,1]; guard the zero corner
            target = target * T::of(slack.max(1e-9));
        }
        let factor = target / norm_beta;
        for (idx, a) in entries.drain(..) {
            out.insert(freqs[idx].clone(), a * factor);
        }
    }
    Ok(out)
}

/// Membership report: per-level slack `cap_j - b_j` (nonnegative when the
/// level is admissible).
#[derive(Debug, Clone)]
pub struct MembershipReport<T: Real> {
    pub is_member: bool,
    pub level_norms: Vec<T>,
    pub level_slack: Vec<T>,
}

/// Certifies the given representation against the class constraint: every
/// level norm must stay below its cap up to relative 1e-12. This is a
/// one-sided check on the representation at hand, not a membership oracle
/// for the function it represents.
pub fn class_membership_check<T: Real>(
    coeffs: &CoefficientVector<T>,
    spec: &ClassSpec<T>,
) -> Result<MembershipReport<T>> {
    let top = coeffs.max_level();
    let norms = block_norms(coeffs, spec.beta, top)?;
    let mut is_member = true;
    let mut slack = Vec::with_capacity(norms.len());
    for (j, bj) in norms.iter().enumerate() {
        let cap = spec.level_cap(j);
        if *bj > cap * T::of(1.0 + 1e-12) {
            is_member = false;
        }
        slack.push(cap - *bj);
    }
    Ok(MembershipReport {
        is_member,
        level_norms: norms,
        level_slack: slack,
    })
}

/// Tail-bound data: `lhs = ||f - S_n||_p` with `S_n` the sum of all levels
/// `<= n`, and the certified shape `rhs = B Σ_{j=n}^{J-1} 2^{-r(j+1)}`
/// (the dropped levels are `n+1..=J`, each contributing at most its block
/// `l_1` mass, which the class constraint caps at `2^{-r(j)}`).
#[derive(Debug, Clone, Copy)]
pub struct TailBound<T: Real> {
    pub lhs: T,
    pub rhs_shape: T,
}

/// Evaluates both sides of the partial-sum tail bound. Errors if the input
/// fails the membership check (the chain is only certified on the class).
pub fn tail_bound_check<T: Real>(
    coeffs: &CoefficientVector<T>,
    spec: &ClassSpec<T>,
    n: usize,
    p: LpExponent<T>,
) -> Result<TailBound<T>> {
    let membership = class_membership_check(coeffs, spec)?;
    if !membership.is_member {
        return Err(Error::Precondition(
            "tail bound requires a class member".into(),
        ));
    }
    let tail = coeffs.filter(|k| k.level() > n);
    let lhs = continuous_lp_norm(&tail, p)?;
    let j_top = coeffs.max_level();
    let mut rhs = T::zero();
    let mut j = n;
    while j < j_top {
        rhs = rhs + spec.level_cap(j + 1);
        j += 1;
    }
    Ok(TailBound {
        lhs,
        rhs_shape: spec.system_bound * rhs,
    })
}

/// Both sides of the block-exponent comparison for a polynomial with
/// per-axis frequencies up to `N`:
/// `(Σ|a_k|^beta)^{1/beta} <= (2N+1)^{d(1/beta - 1/2)} (Σ|a_k|^2)^{1/2}`.
/// This is a pure norm-comparison inequality and always holds.
pub fn a_beta_holder_bound_check<T: Real>(
    coeffs: &CoefficientVector<T>,
    beta: T,
    max_frequency: usize,
    dim: usize,
) -> Result<(T, T)> {
    if !(beta > T::zero() && beta <= T::one()) {
        return Err(Error::InvalidParameter("beta must lie in (0,1]".into()));
    }
    if coeffs.max_abs_frequency() > max_frequency as i64 {
        return Err(Error::InvalidParameter(format!(
            "coefficients reach frequency {} beyond the declared {}",
            coeffs.max_abs_frequency(),
            max_frequency
        )));
    }
    let lhs = coeffs
        .iter()
        .map(|(_, a)| a.norm().powf(beta))
        .sum::<T>()
        .powf(T::one() / beta);
    let card = T::of((2 * max_frequency + 1) as f64);
    let rhs = card.powf(T::of(dim as f64) * (T::one() / beta - T::of(0.5))) * coeffs.l2_norm();
    Ok((lhs, rhs))
}

/// Width lower-bound experiment: for random `n`-dimensional subspaces of an
/// `N`-dimensional coordinate space, the worst distance from a coordinate
/// vector to the subspace is at least `sqrt(1 - n/N)`. Returns the minimum
/// observed worst-case distance over the trials and the bound.
pub fn width_lower_bound_check<T: Real>(
    n_ambient: usize,
    n_subspace: usize,
    trials: usize,
    seed: u64,
) -> Result<(T, T)> {
    if n_subspace >= n_ambient {
        return Err(Error::InvalidParameter(
            "subspace dimension must be below the ambient dimension".into(),
        ));
    }
    let bound = (T::one() - T::of(n_subspace as f64) / T::of(n_ambient as f64)).sqrt();
    let mut min_worst = T::infinity();
    for trial in 0..trials {
        let mut rng = stream(seed, "width-frame", trial as u64);
        let worst = if n_subspace == 0 {
            T::one()
        } else {
            let mut frame: Vec<Vec<Cplx<T>>> = (0..n_subspace)
                .map(|_| {
                    (0..n_ambient)
                        .map(|_| {
                            Complex::new(
                                T::of(gaussian(&mut rng)),
                                T::of(gaussian(&mut rng)),
                            )
                        })
                        .collect()
                })
                .collect();
            orthonormalize_rows(&mut frame)?;
            // dist(e_j, span)^2 = 1 - Σ_i |h_i[j]|^2.
            let mut worst = T::zero();
            for j in 0..n_ambient {
                let mut caught = T::zero();
                for h in &frame {
                    caught = caught + h[j].norm_sqr();
                }
                let dist = (T::one() - caught).max(T::zero()).sqrt();
                worst = worst.max(dist);
            }
            worst
        };
        min_worst = min_worst.min(worst);
    }
    Ok((min_worst, bound))
}

/// Standard normal via Box-Muller on the given stream.
pub(crate) fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.random::<f64>().max(1e-300);
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
