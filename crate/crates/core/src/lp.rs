//! Discrete `L_p` spaces: norms and norming (peak) functionals.

use std::sync::Arc;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::points::DiscreteMeasure;
use crate::scalar::Real;
use crate::Cplx;

/// Exponent `p` with the derived quantities `p* = min(p,2)` and
/// `q* = p*/(p*-1)`; `q*` is undefined at `p = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpExponent<T: Real> {
    p: T,
}

impl<T: Real> LpExponent<T> {
    pub fn new(p: T) -> Result<Self> {
        if p < T::one() || !p.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "p must be a finite real >= 1, got {}",
                p
            )));
        }
        Ok(Self { p })
    }

    pub fn p(&self) -> T {
        self.p
    }

    pub fn p_star(&self) -> T {
        self.p.min(T::of(2.0))
    }

    /// `q* = p*/(p*-1)`; `None` at `p = 1`, where the dual exponent is
    /// infinite and iteration-budget formulas are not applicable.
    pub fn q_star(&self) -> Option<T> {
        let ps = self.p_star();
        if ps <= T::one() {
            None
        } else {
            Some(ps / (ps - T::one()))
        }
    }

    pub fn is_two(&self) -> bool {
        self.p == T::of(2.0)
    }
}

/// Complex values of a function tabulated on the support of a measure.
#[derive(Debug, Clone)]
pub struct SampledFunction<T: Real> {
    values: Vec<Cplx<T>>,
    measure: Arc<DiscreteMeasure<T>>,
}

impl<T: Real> SampledFunction<T> {
    pub fn new(values: Vec<Cplx<T>>, measure: Arc<DiscreteMeasure<T>>) -> Result<Self> {
        if values.len() != measure.len() {
            return Err(Error::DimensionMismatch {
                context: "sampled function values",
                expected: measure.len(),
                got: values.len(),
            });
        }
        Ok(Self { values, measure })
    }

    pub fn zero(measure: Arc<DiscreteMeasure<T>>) -> Self {
        Self {
            values: vec![Complex::new(T::zero(), T::zero()); measure.len()],
            measure,
        }
    }

    pub fn values(&self) -> &[Cplx<T>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Cplx<T>] {
        &mut self.values
    }

    pub fn measure(&self) -> &DiscreteMeasure<T> {
        &self.measure
    }

    pub fn measure_arc(&self) -> Arc<DiscreteMeasure<T>> {
        Arc::clone(&self.measure)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks that two functions live on the same number of nodes.
    fn check_compatible(&self, other: &Self, context: &'static str) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                context,
                expected: self.len(),
                got: other.len(),
            });
        }
        Ok(())
    }
}

/// `(Σ_ν w_ν |f(ξ^ν)|^p)^{1/p}`.
pub fn lp_norm<T: Real>(f: &SampledFunction<T>, p: LpExponent<T>) -> T {
    weighted_lp_norm(f.values(), f.measure().weights(), p)
}

/// Same as [`lp_norm`] but over explicit slices; used in inner loops.
pub fn weighted_lp_norm<T: Real>(values: &[Cplx<T>], weights: &[T], p: LpExponent<T>) -> T {
    debug_assert_eq!(values.len(), weights.len());
    let pv = p.p();
    let two = T::of(2.0);
    if pv == two {
        let s: T = values
            .iter()
            .zip(weights)
            .map(|(z, &w)| w * z.norm_sqr())
            .sum();
        return s.sqrt();
    }
    if pv == T::one() {
        return values.iter().zip(weights).map(|(z, &w)| w * z.norm()).sum();
    }
    let half_p = pv / two;
    let s: T = values
        .iter()
        .zip(weights)
        .map(|(z, &w)| w * z.norm_sqr().powf(half_p))
        .sum();
    s.powf(T::one() / pv)
}

/// `max_ν |f(ξ^ν)|`; utility only, there is no norming functional for it.
pub fn sup_norm<T: Real>(f: &SampledFunction<T>) -> T {
    f.values()
        .iter()
        .map(|z| z.norm())
        .fold(T::zero(), |a, b| a.max(b))
}

/// Applies the norming functional of `f` to `g` in `L_p` of the measure both
/// live on:
///
/// `F_f(g) = ‖f‖_p^{1-p} Σ_ν w_ν |f(ξ^ν)|^{p-2} conj(f(ξ^ν)) g(ξ^ν)`.
///
/// `F_f` has unit dual norm and `F_f(f) = ‖f‖_p`. At `p = 1` the kernel
/// degenerates to `sign(conj f)` and we use the subgradient convention of
/// value 0 wherever `f` vanishes; that choice is still a norming functional
/// on the discrete space but is not dictated by the underlying theory.
pub fn norming_functional_apply<T: Real>(
    f: &SampledFunction<T>,
    g: &SampledFunction<T>,
    p: LpExponent<T>,
) -> Result<Cplx<T>> {
    f.check_compatible(g, "norming functional arguments")?;
    let norm_f = lp_norm(f, p);
    if norm_f <= T::zero() {
        return Err(Error::Precondition(
            "norming functional of the zero function (zero residual)".into(),
        ));
    }
    Ok(norming_functional_apply_prenormed(
        f.values(),
        g.values(),
        f.measure().weights(),
        p,
        norm_f,
    ))
}

/// Inner-loop variant taking `‖f‖_p` precomputed.
pub fn norming_functional_apply_prenormed<T: Real>(
    f: &[Cplx<T>],
    g: &[Cplx<T>],
    weights: &[T],
    p: LpExponent<T>,
    norm_f: T,
) -> Cplx<T> {
    let pv = p.p();
    let two = T::of(2.0);
    let mut acc = Complex::new(T::zero(), T::zero());
    if pv == two {
        for ((zf, zg), &w) in f.iter().zip(g).zip(weights) {
            acc = acc + zf.conj() * zg * w;
        }
        return acc / norm_f;
    }
    if pv == T::one() {
        for ((zf, zg), &w) in f.iter().zip(g).zip(weights) {
            let a = zf.norm();
            if a > T::zero() {
                acc = acc + zf.conj() * zg * (w / a);
            }
        }
        return acc;
    }
    let exponent = (pv - two) / two;
    for ((zf, zg), &w) in f.iter().zip(g).zip(weights) {
        let a2 = zf.norm_sqr();
        if a2 > T::zero() {
            acc = acc + zf.conj() * zg * (w * a2.powf(exponent));
        }
    }
    acc * norm_f.powf(T::one() - pv)
}

/// Norm of `f` under the half/half mixture of the two measures the inputs
/// live on: `((‖f‖_{L_p(a)}^p + ‖f‖_{L_p(b)}^p)/2)^{1/p}`.
pub fn mixed_measure_norm<T: Real>(
    f_grid: &SampledFunction<T>,
    f_points: &SampledFunction<T>,
    p: LpExponent<T>,
) -> T {
    let a = lp_norm(f_grid, p);
    let b = lp_norm(f_points, p);
    let pv = p.p();
    let half = T::of(0.5);
    ((a.powf(pv) + b.powf(pv)) * half).powf(T::one() / pv)
}

/// Pointwise linear combination `f + alpha * g`.
pub fn axpy<T: Real>(f: &SampledFunction<T>, alpha: Cplx<T>, g: &SampledFunction<T>) -> Result<SampledFunction<T>> {
    f.check_compatible(g, "axpy")?;
    let values = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(a, b)| *a + alpha * *b)
        .collect();
    SampledFunction::new(values, f.measure_arc())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::points::{draw_random_points, DiscreteMeasure};
    use crate::rng::stream;
    use rand::Rng;

    fn uniform_measure(m: usize, seed: u64) -> Arc<DiscreteMeasure<f64>> {
        Arc::new(DiscreteMeasure::uniform(
            draw_random_points::<f64>(1, m, seed).unwrap(),
        ))
    }

    fn random_function(measure: &Arc<DiscreteMeasure<f64>>, seed: u64) -> SampledFunction<f64> {
        let mut rng = stream(seed, "lp-test", 0);
        let values = (0..measure.len())
            .map(|_| Complex::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0))
            .collect();
        SampledFunction::new(values, Arc::clone(measure)).unwrap()
    }

    fn p(v: f64) -> LpExponent<f64> {
        LpExponent::new(v).unwrap()
    }

    #[test]
    fn constant_function_has_unit_norm() {
        let m = uniform_measure(4, 0);
        let f = SampledFunction::new(vec![Complex::new(1.0, 0.0); 4], m).unwrap();
        assert!((lp_norm(&f, p(2.0)) - 1.0).abs() < 1e-15);
        assert!((lp_norm(&f, p(1.5)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_point_example() {
        let m = uniform_measure(2, 1);
        let f = SampledFunction::new(
            vec![Complex::new(3.0, 0.0), Complex::new(4.0, 0.0)],
            m,
        )
        .unwrap();
        assert!((lp_norm(&f, p(2.0)) - 12.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unimodular_values_any_p() {
        let m = uniform_measure(17, 2);
        let values = m
            .support()
            .iter()
            .map(|x| Complex::from_polar(1.0, x[0]))
            .collect();
        let f = SampledFunction::new(values, Arc::clone(&m)).unwrap();
        for pv in [1.0, 1.5, 2.0, 3.0, 4.0] {
            assert!((lp_norm(&f, p(pv)) - 1.0).abs() < 1e-13, "p={}", pv);
        }
    }

    #[test]
    fn homogeneity_and_triangle() {
        let m = uniform_measure(23, 3);
        for (i, pv) in [1.0, 1.5, 2.0, 3.0, 4.0].into_iter().enumerate() {
            let f = random_function(&m, 10 + i as u64);
            let g = random_function(&m, 20 + i as u64);
            let alpha = Complex::new(-1.7, 0.3);
            let scaled = SampledFunction::new(
                f.values().iter().map(|z| alpha * z).collect(),
                f.measure_arc(),
            )
            .unwrap();
            let lhs = lp_norm(&scaled, p(pv));
            let rhs = alpha.norm() * lp_norm(&f, p(pv));
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));

            let sum = axpy(&f, Complex::new(1.0, 0.0), &g).unwrap();
            assert!(lp_norm(&sum, p(pv)) <= lp_norm(&f, p(pv)) + lp_norm(&g, p(pv)) + 1e-12);
        }
    }

    #[test]
    fn norm_monotone_in_p_for_probability_measures() {
        let m = uniform_measure(19, 4);
        let f = random_function(&m, 5);
        let grid = [1.0, 1.5, 2.0, 3.0, 4.0];
        for w in grid.windows(2) {
            assert!(lp_norm(&f, p(w[0])) <= lp_norm(&f, p(w[1])) + 1e-12);
        }
    }

    #[test]
    fn peak_property_and_dual_bound() {
        let m = uniform_measure(11, 6);
        for pv in [1.0, 1.5, 2.0, 3.0, 4.0] {
            for t in 0..50 {
                let f = random_function(&m, 100 + t);
                let g = random_function(&m, 200 + t);
                let nf = lp_norm(&f, p(pv));
                let peak = norming_functional_apply(&f, &f, p(pv)).unwrap();
                assert!(
                    (peak.re - nf).abs() <= 1e-10 * nf && peak.im.abs() <= 1e-10 * nf,
                    "peak property failed at p={}",
                    pv
                );
                let fg = norming_functional_apply(&f, &g, p(pv)).unwrap();
                assert!(fg.norm() <= (1.0 + 1e-10) * lp_norm(&g, p(pv)));
            }
        }
    }

    #[test]
    fn hilbert_case_is_weighted_inner_product() {
        let m = uniform_measure(9, 7);
        let f = random_function(&m, 1);
        let g = random_function(&m, 2);
        let direct: Complex<f64> = f
            .values()
            .iter()
            .zip(g.values())
            .zip(m.weights())
            .map(|((a, b), &w)| a.conj() * b * w)
            .sum();
        let via = norming_functional_apply(&f, &g, p(2.0)).unwrap();
        let expected = direct / lp_norm(&f, p(2.0));
        assert!((via - expected).norm() < 1e-14);
    }

    #[test]
    fn p4_two_point_hand_example() {
        // f = (1, 2) with weights 1/2: the kernel gives
        // F_f(g) = 8.5^{-3/4} (g1 + 8 g2)/2, and F_f(f) = 8.5^{1/4}.
        let m = uniform_measure(2, 8);
        let f = SampledFunction::new(
            vec![Complex::new(1.0, 0.0), Complex::new(2.0, 0.0)],
            Arc::clone(&m),
        )
        .unwrap();
        let g = SampledFunction::new(
            vec![Complex::new(0.3, -0.1), Complex::new(-1.2, 0.8)],
            Arc::clone(&m),
        )
        .unwrap();
        let expect = 8.5f64.powf(-0.75) * (g.values()[0] + g.values()[1] * 8.0) / 2.0;
        let got = norming_functional_apply(&f, &g, p(4.0)).unwrap();
        assert!((got - expect).norm() < 1e-12);

        let peak = norming_functional_apply(&f, &f, p(4.0)).unwrap();
        // Identity check F_f(f) = ||f||_4 = 8.5^{1/4}.
        assert!((peak.re - 8.5f64.powf(0.25)).abs() < 1e-12);
        assert!((peak.re - lp_norm(&f, p(4.0))).abs() < 1e-12);
    }

    #[test]
    fn zero_function_is_rejected() {
        let m = uniform_measure(3, 9);
        let z = SampledFunction::zero(Arc::clone(&m));
        let f = random_function(&m, 3);
        assert!(norming_functional_apply(&z, &f, p(2.0)).is_err());
    }

    #[test]
    fn mixed_norm_examples() {
        let grid = uniform_measure(8, 10);
        let pts = uniform_measure(3, 11);
        for pv in [1.5, 2.0, 3.0] {
            // f == 1 on both supports.
            let ones_g =
                SampledFunction::new(vec![Complex::new(1.0, 0.0); 8], Arc::clone(&grid)).unwrap();
            let ones_p =
                SampledFunction::new(vec![Complex::new(1.0, 0.0); 3], Arc::clone(&pts)).unwrap();
            assert!((mixed_measure_norm(&ones_g, &ones_p, p(pv)) - 1.0).abs() < 1e-13);

            // zero on the grid, constant c on the points -> c * 2^{-1/p}.
            let c = 1.9;
            let zeros_g = SampledFunction::zero(Arc::clone(&grid));
            let cs_p =
                SampledFunction::new(vec![Complex::new(c, 0.0); 3], Arc::clone(&pts)).unwrap();
            let expect = c * 0.5f64.powf(1.0 / pv);
            assert!((mixed_measure_norm(&zeros_g, &cs_p, p(pv)) - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn mixed_norm_matches_concatenated_measure() {
        let grid = uniform_measure(8, 12);
        let pts = uniform_measure(5, 13);
        let f_g = random_function(&grid, 30);
        let f_p = random_function(&pts, 31);
        let mixed = Arc::new(DiscreteMeasure::mixed(&grid, &pts).unwrap());
        let mut values = f_g.values().to_vec();
        values.extend_from_slice(f_p.values());
        let f_mixed = SampledFunction::new(values, mixed).unwrap();
        for pv in [1.0, 1.5, 2.0, 3.0] {
            let a = mixed_measure_norm(&f_g, &f_p, p(pv));
            let b = lp_norm(&f_mixed, p(pv));
            assert!((a - b).abs() < 1e-13, "p={}", pv);
        }
    }

    #[test]
    fn q_star_sentinel_at_p_one() {
        assert!(p(1.0).q_star().is_none());
        assert!((p(1.5).q_star().unwrap() - 3.0).abs() < 1e-15);
        assert!((p(2.0).q_star().unwrap() - 2.0).abs() < 1e-15);
        assert!((p(4.0).q_star().unwrap() - 2.0).abs() < 1e-15);
        assert!(LpExponent::new(0.9).is_err());
    }
}
