//! The multivariate trigonometric system with dyadic block structure.
//!
//! Frequencies `k` in `Z^d` index exponentials `e^{i(k,x)}`. Level `j`
//! collects the frequencies with `[2^{j-1}] <= ||k||_inf < 2^j`, so level 0
//! holds `k = 0` and level `j >= 1` holds the dyadic shell below `2^j`.
//! The canonical enumeration (level, then lexicographic on the tuple) is
//! what every tie-break downstream refers to.

use std::collections::{BTreeMap, HashMap};

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lp::{weighted_lp_norm, LpExponent};
use crate::points::{DiscreteMeasure, PointSet};
use crate::scalar::Real;
use crate::Cplx;

/// Integer frequency vector of length `d`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrequencyIndex(pub Vec<i64>);

impl FrequencyIndex {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn inf_norm(&self) -> i64 {
        self.0.iter().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Dyadic level: 0 for the zero frequency, otherwise the unique `j >= 1`
    /// with `2^{j-1} <= ||k||_inf < 2^j`.
    pub fn level(&self) -> usize {
        let n = self.inf_norm();
        if n == 0 {
            0
        } else {
            (64 - (n as u64).leading_zeros()) as usize
        }
    }
}

/// All frequencies of level `j` in canonical (lexicographic) order.
pub fn level_frequencies(dim: usize, j: usize) -> Vec<FrequencyIndex> {
    let hi = 1i64 << j; // exclusive
    let lo = if j == 0 { 0 } else { 1i64 << (j - 1) }; // inclusive
    let range: Vec<i64> = (-(hi - 1)..hi).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    'outer: loop {
        let k: Vec<i64> = idx.iter().map(|&i| range[i]).collect();
        let inf = k.iter().map(|x| x.abs()).max().unwrap();
        if inf >= lo && inf < hi {
            out.push(FrequencyIndex(k));
        }
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

/// Number of frequencies at level `j` in dimension `d`.
pub fn level_size(dim: usize, j: usize) -> usize {
    let cube = |half: i64| -> usize {
        let side = 2 * half - 1;
        (side as usize).pow(dim as u32)
    };
    if j == 0 {
        1
    } else {
        cube(1 << j) - cube(1 << (j - 1))
    }
}

/// Finite trigonometric dictionary: all `||k||_inf < 2^J`, canonical order.
#[derive(Debug, Clone)]
pub struct TrigSystem {
    dim: usize,
    max_level: usize,
    frequencies: Vec<FrequencyIndex>,
    level_starts: Vec<usize>,
    lookup: HashMap<FrequencyIndex, usize>,
}

impl TrigSystem {
    pub fn new(dim: usize, max_level: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let expected: usize = ((1usize << (max_level + 1)) - 1).pow(dim as u32);
        if expected > 40_000_000 {
            return Err(Error::InvalidParameter(format!(
                "trig system with {} elements is beyond desk scale",
                expected
            )));
        }
        let mut frequencies = Vec::with_capacity(expected);
        let mut level_starts = Vec::with_capacity(max_level + 2);
        for j in 0..=max_level {
            level_starts.push(frequencies.len());
            frequencies.extend(level_frequencies(dim, j));
        }
        level_starts.push(frequencies.len());
        debug_assert_eq!(frequencies.len(), expected);
        let lookup = frequencies
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), i))
            .collect();
        Ok(Self {
            dim,
            max_level,
            frequencies,
            level_starts,
            lookup,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_level(&self) -> usize {
        self.max_level
    }

    /// Dictionary size N.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Largest per-axis frequency, `2^J - 1`.
    pub fn max_frequency(&self) -> usize {
        (1usize << self.max_level) - 1
    }

    /// Uniform bound of the system elements; exponentials are unimodular.
    pub fn uniform_bound<T: Real>(&self) -> T {
        T::one()
    }

    pub fn frequencies(&self) -> &[FrequencyIndex] {
        &self.frequencies
    }

    pub fn frequency(&self, atom: usize) -> &FrequencyIndex {
        &self.frequencies[atom]
    }

    /// Canonical position of a frequency, if it belongs to the system.
    pub fn index_of(&self, k: &FrequencyIndex) -> Option<usize> {
        self.lookup.get(k).copied()
    }

    /// Atom range of dyadic level `j`.
    pub fn level_range(&self, j: usize) -> std::ops::Range<usize> {
        self.level_starts[j]..self.level_starts[j + 1]
    }

    /// Evaluates a coefficient vector at the given points after checking
    /// that every index belongs to the dictionary.
    pub fn evaluate<T: Real>(
        &self,
        coeffs: &CoefficientVector<T>,
        points: &PointSet<T>,
    ) -> Result<Vec<Cplx<T>>> {
        for (k, _) in coeffs.iter() {
            if self.index_of(k).is_none() {
                return Err(Error::UnknownIndex(format!("{:?}", k.0)));
            }
        }
        if points.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "evaluation points",
                expected: self.dim,
                got: points.dim(),
            });
        }
        Ok(eval_coeffs(coeffs, points))
    }

    /// `(Σ |a_k|^2)^{1/2}`: exact continuous `L_2` norm by orthonormality.
    pub fn continuous_l2_norm<T: Real>(&self, coeffs: &CoefficientVector<T>) -> T {
        coeffs.l2_norm()
    }

    /// Continuous `L_p` norm under normalized Lebesgue measure: Parseval at
    /// `p = 2`, oversampled tensor-grid quadrature otherwise.
    pub fn continuous_lp_norm<T: Real>(
        &self,
        coeffs: &CoefficientVector<T>,
        p: LpExponent<T>,
    ) -> Result<T> {
        continuous_lp_norm(coeffs, p)
    }
}

/// Continuous `L_p` norm of a trigonometric polynomial given by its
/// coefficients: Parseval at `p = 2`, quadrature otherwise.
pub fn continuous_lp_norm<T: Real>(coeffs: &CoefficientVector<T>, p: LpExponent<T>) -> Result<T> {
    if p.is_two() {
        return Ok(coeffs.l2_norm());
    }
    let dim = match coeffs.dim() {
        Some(d) => d,
        None => return Ok(T::zero()),
    };
    let max_freq = coeffs.max_abs_frequency() as usize;
    let measure = DiscreteMeasure::quadrature(dim, max_freq)?;
    let values = eval_coeffs(coeffs, measure.support());
    Ok(weighted_lp_norm(&values, measure.weights(), p))
}

/// Sparse complex coefficient vector indexed by frequency.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CoefficientVector<T: Real> {
    entries: BTreeMap<FrequencyIndex, Cplx<T>>,
}

impl<T: Real> CoefficientVector<T> {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (FrequencyIndex, Cplx<T>)>) -> Self {
        let mut v = Self::new();
        for (k, a) in pairs {
            v.insert(k, a);
        }
        v
    }

    /// Inserting an exact zero removes the entry: no explicit zeros stored.
    pub fn insert(&mut self, k: FrequencyIndex, a: Cplx<T>) {
        if a.re == T::zero() && a.im == T::zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, a);
        }
    }

    pub fn get(&self, k: &FrequencyIndex) -> Cplx<T> {
        self.entries
            .get(k)
            .copied()
            .unwrap_or_else(|| Complex::new(T::zero(), T::zero()))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&FrequencyIndex, &Cplx<T>)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.entries.keys().next().map(|k| k.dim())
    }

    pub fn max_abs_frequency(&self) -> i64 {
        self.entries.keys().map(|k| k.inf_norm()).max().unwrap_or(0)
    }

    pub fn max_level(&self) -> usize {
        self.entries.keys().map(|k| k.level()).max().unwrap_or(0)
    }

    pub fn l1_norm(&self) -> T {
        self.entries.values().map(|a| a.norm()).sum()
    }

    pub fn l2_norm(&self) -> T {
        self.entries
            .values()
            .map(|a| a.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub fn scale(&self, alpha: Cplx<T>) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .map(|(k, a)| (k.clone(), *a * alpha))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, a) in other.iter() {
            let sum = out.get(k) + *a;
            out.insert(k.clone(), sum);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex::new(-T::one(), T::zero())))
    }

    /// Restriction to the frequencies for which `keep` holds.
    pub fn filter(&self, mut keep: impl FnMut(&FrequencyIndex) -> bool) -> Self {
        Self {
            entries: self
                .entries
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, a)| (k.clone(), *a))
                .collect(),
        }
    }
}

/// Block norms `b_j = (Σ_{level j} |a_k|^beta)^{1/beta}` for `j = 0..=levels`.
///
/// Frequencies above the last requested level are an error: the caller
/// decides the truncation, blocks never silently drop mass.
pub fn block_norms<T: Real>(
    coeffs: &CoefficientVector<T>,
    beta: T,
    levels: usize,
) -> Result<Vec<T>> {
    if beta <= T::zero() || beta > T::one() {
        return Err(Error::InvalidParameter(format!(
            "beta must lie in (0, 1], got {}",
            beta
        )));
    }
    let mut sums = vec![T::zero(); levels + 1];
    for (k, a) in coeffs.iter() {
        let j = k.level();
        if j > levels {
            return Err(Error::InvalidParameter(format!(
                "coefficient at level {} above requested {}",
                j, levels
            )));
        }
        sums[j] = sums[j] + a.norm().powf(beta);
    }
    let inv_beta = T::one() / beta;
    Ok(sums
        .into_iter()
        .map(|s| if s > T::zero() { s.powf(inv_beta) } else { T::zero() })
        .collect())
}

/// Evaluates `Σ a_k e^{i(k,x)}` at every point of the set.
///
/// Dense univariate coefficient sets walk the frequency range with an
/// incremental phase per point; everything else computes each exponential
/// directly.
pub fn eval_coeffs<T: Real>(coeffs: &CoefficientVector<T>, points: &PointSet<T>) -> Vec<Cplx<T>> {
    let dim = points.dim();
    let max_freq = coeffs.max_abs_frequency();
    let dense_walk = dim == 1 && coeffs.len() as i64 > max_freq / 4 && max_freq > 16;

    if dense_walk {
        let span = (2 * max_freq + 1) as usize;
        let mut table = vec![Complex::new(T::zero(), T::zero()); span];
        for (k, a) in coeffs.iter() {
            table[(k.0[0] + max_freq) as usize] = *a;
        }
        par_map_points(points, |x| {
            let x0 = x[0];
            let step = Complex::from_polar(T::one(), x0);
            let mut phase = Complex::from_polar(T::one(), -T::of(max_freq as f64) * x0);
            let mut acc = Complex::new(T::zero(), T::zero());
            for a in &table {
                acc = acc + *a * phase;
                phase = phase * step;
            }
            acc
        })
    } else {
        let pairs: Vec<(&FrequencyIndex, &Cplx<T>)> = coeffs.iter().collect();
        par_map_points(points, move |x| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (k, a) in &pairs {
                let mut dot = T::zero();
                for (ka, xa) in k.0.iter().zip(x) {
                    dot = dot + T::of(*ka as f64) * *xa;
                }
                acc = acc + **a * Complex::from_polar(T::one(), dot);
            }
            acc
        })
    }
}

/// `Σ_j kernel_j e^{+i k x_j}` for `k = -k_max..=k_max` on a univariate
/// point set (`kernel = None` means the constant 1), returned in k order.
/// Points are processed in fixed-size chunks reduced in chunk order, so the
/// result does not depend on the worker schedule.
pub fn univariate_phase_sums<T: Real>(
    points: &PointSet<T>,
    kernel: Option<&[Cplx<T>]>,
    k_max: i64,
) -> Vec<Cplx<T>> {
    assert_eq!(points.dim(), 1);
    let span = (2 * k_max + 1) as usize;
    let m = points.count();
    let chunk = 2048;
    let n_chunks = m.div_ceil(chunk);
    let partials: Vec<Vec<Cplx<T>>> = (0..n_chunks)
        .into_par_iter()
        .map(|cix| {
            let lo = cix * chunk;
            let hi = (lo + chunk).min(m);
            let mut acc = vec![Complex::new(T::zero(), T::zero()); span];
            for j in lo..hi {
                let x = points.point(j)[0];
                let h = match kernel {
                    Some(ker) => ker[j],
                    None => Complex::new(T::one(), T::zero()),
                };
                if h.re == T::zero() && h.im == T::zero() {
                    continue;
                }
                let step = Complex::from_polar(T::one(), x);
                let mut phase = h * Complex::from_polar(T::one(), -T::of(k_max as f64) * x);
                for a in acc.iter_mut() {
                    *a = *a + phase;
                    phase = phase * step;
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Complex::new(T::zero(), T::zero()); span];
    for part in partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t = *t + p;
        }
    }
    total
}

/// Values of the single atom `e^{i(k,x)}` on a point set.
pub fn atom_values<T: Real>(k: &FrequencyIndex, points: &PointSet<T>) -> Vec<Cplx<T>> {
    par_map_points(points, |x| {
        let mut dot = T::zero();
        for (ka, xa) in k.0.iter().zip(x) {
            dot = dot + T::of(*ka as f64) * *xa;
        }
        Complex::from_polar(T::one(), dot)
    })
}

/// Order-preserving parallel map over points with fixed chunking, so the
/// result does not depend on the worker schedule.
fn par_map_points<T: Real, F>(points: &PointSet<T>, f: F) -> Vec<Cplx<T>>
where
    F: Fn(&[T]) -> Cplx<T> + Sync,
{
    let m = points.count();
    if m < 512 {
        return (0..m).map(|j| f(points.point(j))).collect();
    }
    let chunk = 512;
    let n_chunks = m.div_ceil(chunk);
    let parts: Vec<Vec<Cplx<T>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * chunk;
            let hi = (lo + chunk).min(m);
            (lo..hi).map(|j| f(points.point(j))).collect()
        })
        .collect();
    parts.concat()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::uniform_grid;
    use crate::rng::stream;
    use rand::Rng;

    fn k1(k: i64) -> FrequencyIndex {
        FrequencyIndex(vec![k])
    }

    #[test]
    fn levels_partition_frequencies() {
        for dim in [1usize, 2] {
            let sys = TrigSystem::new(dim, 3).unwrap();
            assert_eq!(sys.len(), ((1 << 4) - 1usize).pow(dim as u32));
            // Every frequency sits in exactly one level and the level agrees
            // with its inf-norm bracket.
            let mut seen = std::collections::HashSet::new();
            for j in 0..=3 {
                for i in sys.level_range(j) {
                    let k = sys.frequency(i);
                    assert!(seen.insert(k.clone()));
                    let n = k.inf_norm();
                    let lo = if j == 0 { 0 } else { 1 << (j - 1) };
                    assert!(n >= lo && n < (1 << j), "k={:?} j={}", k.0, j);
                    assert_eq!(k.level(), j);
                }
                assert_eq!(sys.level_range(j).len(), level_size(dim, j));
            }
            assert_eq!(seen.len(), sys.len());
        }
    }

    #[test]
    fn level_zero_is_constant() {
        assert_eq!(level_frequencies(2, 0), vec![FrequencyIndex(vec![0, 0])]);
    }

    #[test]
    fn evaluation_matches_unit_circle() {
        let sys = TrigSystem::new(1, 2).unwrap();
        let coeffs = CoefficientVector::from_pairs([(k1(1), Complex::new(1.0, 0.0))]);
        let pts = PointSet::new(
            1,
            vec![0.0, std::f64::consts::FRAC_PI_2, std::f64::consts::PI],
        )
        .unwrap();
        let vals = sys.evaluate(&coeffs, &pts).unwrap();
        assert!((vals[0] - Complex::new(1.0, 0.0)).norm() < 1e-15);
        assert!((vals[1] - Complex::new(0.0, 1.0)).norm() < 1e-15);
        assert!((vals[2] - Complex::new(-1.0, 0.0)).norm() < 1e-15);

        let ones = CoefficientVector::from_pairs([(k1(0), Complex::new(1.0, 0.0))]);
        for v in sys.evaluate(&ones, &pts).unwrap() {
            assert!((v - Complex::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn evaluation_is_linear() {
        let pts = crate::points::draw_random_points::<f64>(1, 40, 5).unwrap();
        let mut rng = stream(9, "trig-test", 0);
        let mut rand_coeffs = |n: usize, hi: i64| {
            let mut c = CoefficientVector::new();
            for _ in 0..n {
                let k = rng.random_range(-hi..=hi);
                c.insert(
                    k1(k),
                    Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                );
            }
            c
        };
        let a = rand_coeffs(5, 20);
        let b = rand_coeffs(7, 20);
        let sum = a.add(&b);
        let va = eval_coeffs(&a, &pts);
        let vb = eval_coeffs(&b, &pts);
        let vs = eval_coeffs(&sum, &pts);
        for i in 0..pts.count() {
            assert!((vs[i] - (va[i] + vb[i])).norm() < 1e-12);
        }
    }

    #[test]
    fn dense_walk_agrees_with_direct_path() {
        // Force both evaluation paths on the same data.
        let pts = crate::points::draw_random_points::<f64>(1, 700, 11).unwrap();
        let mut rng = stream(12, "trig-test", 1);
        let mut dense = CoefficientVector::new();
        for k in -64i64..=64 {
            dense.insert(
                k1(k),
                Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
            );
        }
        let fast = eval_coeffs(&dense, &pts); // dense walk (129 coeffs, maxfreq 64)
        let direct: Vec<Cplx<f64>> = (0..pts.count())
            .map(|j| {
                let x = pts.point(j)[0];
                dense
                    .iter()
                    .map(|(k, a)| *a * Complex::from_polar(1.0, k.0[0] as f64 * x))
                    .sum()
            })
            .collect();
        for i in 0..pts.count() {
            assert!((fast[i] - direct[i]).norm() < 1e-10);
        }
    }

    #[test]
    fn parseval_simple_cases() {
        let sys = TrigSystem::new(1, 3).unwrap();
        let c3 = CoefficientVector::<f64>::from_pairs([(k1(0), Complex::new(3.0, 0.0))]);
        assert!((sys.continuous_l2_norm(&c3) - 3.0).abs() < 1e-15);
        let pythag = CoefficientVector::<f64>::from_pairs([
            (k1(1), Complex::new(3.0, 0.0)),
            (k1(-2), Complex::new(0.0, 4.0)),
        ]);
        assert!((sys.continuous_l2_norm(&pythag) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn parseval_matches_quadrature_on_random_coeffs() {
        // Quadrature oracle: the grid is wide enough that |f|^2 integrates
        // exactly; agreement pins the Parseval route.
        let sys = TrigSystem::new(1, 4).unwrap();
        let p2 = LpExponent::new(2.0).unwrap();
        let mut rng = stream(21, "trig-test", 2);
        for _ in 0..100 {
            let mut c = CoefficientVector::new();
            for _ in 0..6 {
                let k = rng.random_range(-15i64..=15);
                c.insert(
                    k1(k),
                    Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                );
            }
            let measure = DiscreteMeasure::quadrature(1, 15).unwrap();
            let vals = eval_coeffs(&c, measure.support());
            let quad = weighted_lp_norm(&vals, measure.weights(), p2);
            let pars = sys.continuous_l2_norm(&c);
            assert!((quad - pars).abs() <= 1e-10 * pars.max(1e-30));
        }
    }

    #[test]
    fn unimodular_atom_has_unit_lp_norm() {
        let sys = TrigSystem::new(1, 3).unwrap();
        for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
            let p = LpExponent::new(p).unwrap();
            let c = CoefficientVector::<f64>::from_pairs([(k1(5), Complex::new(1.0, 0.0))]);
            let n = sys.continuous_lp_norm(&c, p).unwrap();
            assert!((n - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn two_cos_norms() {
        // f = 2 cos x = e^{ix} + e^{-ix}.
        let sys = TrigSystem::new(1, 1).unwrap();
        let c = CoefficientVector::from_pairs([
            (k1(1), Complex::new(1.0, 0.0)),
            (k1(-1), Complex::new(1.0, 0.0)),
        ]);
        let p2 = LpExponent::new(2.0).unwrap();
        assert!((sys.continuous_lp_norm(&c, p2).unwrap() - 2f64.sqrt()).abs() < 1e-12);

        // Moment oracle: integral of (2cos x)^4 over the period is 6, so the
        // L_4 norm is 6^{1/4}; the quadrature value must agree.
        let p4 = LpExponent::new(4.0).unwrap();
        let quad = sys.continuous_lp_norm(&c, p4).unwrap();
        assert!((quad - 6f64.powf(0.25)).abs() < 1e-9, "got {}", quad);
    }

    #[test]
    fn unknown_index_is_rejected() {
        let sys = TrigSystem::new(1, 2).unwrap();
        let c = CoefficientVector::from_pairs([(k1(9), Complex::new(1.0, 0.0))]);
        let pts = uniform_grid::<f64>(1, 8).unwrap();
        assert!(matches!(
            sys.evaluate(&c, &pts),
            Err(Error::UnknownIndex(_))
        ));
    }

    #[test]
    fn block_norm_examples() {
        // Single coefficient of modulus a at level j.
        let c = CoefficientVector::<f64>::from_pairs([(k1(5), Complex::new(0.0, 0.7))]);
        let b = block_norms(&c, 1.0, 4).unwrap();
        assert_eq!(b.len(), 5);
        for (j, bj) in b.iter().enumerate() {
            if j == 3 {
                assert!((bj - 0.7).abs() < 1e-15);
            } else {
                assert_eq!(*bj, 0.0);
            }
        }

        // Two unit-modulus coefficients in one block.
        let c2 = CoefficientVector::<f64>::from_pairs([
            (k1(4), Complex::new(1.0, 0.0)),
            (k1(-6), Complex::from_polar(1.0, 1.1)),
        ]);
        let b1 = block_norms(&c2, 1.0, 3).unwrap();
        assert!((b1[3] - 2.0).abs() < 1e-14);
        let bhalf = block_norms(&c2, 0.5, 3).unwrap();
        assert!((bhalf[3] - 4.0).abs() < 1e-13);
    }

    #[test]
    fn block_norms_are_permutation_invariant_within_a_level() {
        // Reassigning the same moduli to different frequencies of one level
        // leaves the level norm unchanged.
        let a = CoefficientVector::<f64>::from_pairs([
            (k1(4), Complex::new(0.3, 0.4)),
            (k1(7), Complex::new(0.0, -0.2)),
            (k1(-5), Complex::new(0.1, 0.0)),
        ]);
        let b = CoefficientVector::<f64>::from_pairs([
            (k1(-7), Complex::new(0.5, 0.0)),
            (k1(6), Complex::new(0.2, 0.0)),
            (k1(4), Complex::new(0.0, 0.1)),
        ]);
        for beta in [0.5, 1.0] {
            let na = block_norms(&a, beta, 3).unwrap();
            let nb = block_norms(&b, beta, 3).unwrap();
            assert!((na[3] - nb[3]).abs() < 1e-14, "beta={}", beta);
        }
    }

    #[test]
    fn l1_dominated_by_lbeta_blockwise() {
        let mut rng = stream(33, "trig-test", 3);
        for beta in [0.5, 0.75, 1.0] {
            let mut c = CoefficientVector::new();
            for _ in 0..12 {
                let k = rng.random_range(-31i64..=31);
                c.insert(
                    k1(k),
                    Complex::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
                );
            }
            let b1 = block_norms(&c, 1.0, 5).unwrap();
            let bb = block_norms(&c, beta, 5).unwrap();
            for j in 0..=5 {
                assert!(b1[j] <= bb[j] * (1.0 + 1e-12));
            }
        }
    }
}
