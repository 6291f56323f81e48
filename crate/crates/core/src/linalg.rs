//! Small dense complex linear algebra used by projections and baselines.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::Cplx;

/// Conjugated dot product `<a, b> = Σ conj(a_i) b_i`.
pub fn cdot<T: Real>(a: &[Cplx<T>], b: &[Cplx<T>]) -> Cplx<T> {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = Complex::new(T::zero(), T::zero());
    for (x, y) in a.iter().zip(b) {
        acc = acc + x.conj() * *y;
    }
    acc
}

pub fn l2_norm<T: Real>(a: &[Cplx<T>]) -> T {
    a.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Dense Hermitian positive-definite solve by Cholesky, `A x = b` with `A`
/// given row-major. Falls back to a tiny diagonal ridge when a pivot
/// degenerates, reporting whether a ridge was needed.
pub fn solve_hpd<T: Real>(a: &[Cplx<T>], n: usize, b: &[Cplx<T>]) -> Result<(Vec<Cplx<T>>, bool)> {
    debug_assert_eq!(a.len(), n * n);
    debug_assert_eq!(b.len(), n);
    let mut ridge_used = false;
    let mut ridge = T::zero();
    // Scale-aware floor for pivots.
    let max_diag = (0..n)
        .map(|i| a[i * n + i].re.abs())
        .fold(T::zero(), |x, y| x.max(y))
        .max(T::of(1e-300));
    for _attempt in 0..3 {
        match cholesky(a, n, ridge) {
            Some(l) => {
                let x = cholesky_solve(&l, n, b);
                return Ok((x, ridge_used));
            }
            None => {
                ridge_used = true;
                ridge = if ridge == T::zero() {
                    max_diag * T::of(1e-12)
                } else {
                    ridge * T::of(1e4)
                };
            }
        }
    }
    Err(Error::InvalidParameter(
        "normal equations not positive definite even with ridge".into(),
    ))
}

fn cholesky<T: Real>(a: &[Cplx<T>], n: usize, ridge: T) -> Option<Vec<Cplx<T>>> {
    let mut l = vec![Complex::new(T::zero(), T::zero()); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            if i == j {
                sum = sum + Complex::new(ridge, T::zero());
            }
            for k in 0..j {
                sum = sum - l[i * n + k] * l[j * n + k].conj();
            }
            if i == j {
                if sum.re <= T::zero() || sum.re.is_nan() {
                    return None;
                }
                l[i * n + i] = Complex::new(sum.re.sqrt(), T::zero());
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn cholesky_solve<T: Real>(l: &[Cplx<T>], n: usize, b: &[Cplx<T>]) -> Vec<Cplx<T>> {
    // L y = b
    let mut y = vec![Complex::new(T::zero(), T::zero()); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    // L^H x = y
    let mut x = vec![Complex::new(T::zero(), T::zero()); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum = sum - l[k * n + i].conj() * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// In-place radix-2 FFT; `data.len()` must be a power of two.
/// `inverse` applies the conjugate transform and the 1/n scaling.
pub fn fft<T: Real>(data: &mut [Cplx<T>], inverse: bool) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    // Bit-reversal permutation.
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { T::one() } else { -T::one() };
    let mut len = 2;
    while len <= n {
        let ang = sign * T::TAU() / T::of(len as f64);
        let wl = Complex::from_polar(T::one(), ang);
        let mut i = 0;
        while i < n {
            let mut w = Complex::new(T::one(), T::zero());
            for k in 0..len / 2 {
                let u = data[i + k];
                let v = data[i + k + len / 2] * w;
                data[i + k] = u + v;
                data[i + k + len / 2] = u - v;
                w = w * wl;
            }
            i += len;
        }
        len <<= 1;
    }
    if inverse {
        let scale = T::one() / T::of(n as f64);
        for z in data.iter_mut() {
            *z = *z * scale;
        }
    }
}

/// Hermitian Toeplitz operator `G` with `G[i][j] = t[i - j]`, applied via a
/// circulant embedding; `t` maps lag `l` in `-(n-1)..=n-1` to `t[l + n - 1]`.
pub struct ToeplitzOperator<T: Real> {
    n: usize,
    fft_len: usize,
    symbol: Vec<Cplx<T>>,
}

impl<T: Real> ToeplitzOperator<T> {
    pub fn new(lags: &[Cplx<T>], n: usize) -> Self {
        assert_eq!(lags.len(), 2 * n - 1);
        let fft_len = (2 * n).next_power_of_two();
        // Circulant first column: c_j = t_{j} for j = 0..n-1, then zeros,
        // then wrap the negative lags so that c_{L-j} = t_{-j}.
        let mut col = vec![Complex::new(T::zero(), T::zero()); fft_len];
        for j in 0..n {
            col[j] = lags[j + n - 1];
        }
        for j in 1..n {
            col[fft_len - j] = lags[n - 1 - j];
        }
        fft(&mut col, false);
        Self {
            n,
            fft_len,
            symbol: col,
        }
    }

    pub fn apply(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        assert_eq!(x.len(), self.n);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.fft_len];
        buf[..self.n].copy_from_slice(x);
        fft(&mut buf, false);
        for (b, s) in buf.iter_mut().zip(&self.symbol) {
            *b = *b * *s;
        }
        fft(&mut buf, true);
        buf.truncate(self.n);
        buf
    }
}

/// Conjugate gradients for a Hermitian positive-definite operator.
/// Returns the iterate and the achieved relative residual.
pub fn cg_hermitian<T: Real>(
    apply: impl Fn(&[Cplx<T>]) -> Vec<Cplx<T>>,
    b: &[Cplx<T>],
    tol: T,
    max_iter: usize,
) -> (Vec<Cplx<T>>, T) {
    let n = b.len();
    let zero = Complex::new(T::zero(), T::zero());
    let mut x = vec![zero; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let b_norm = l2_norm(b).max(T::of(1e-300));
    let mut rs_old: T = r.iter().map(|z| z.norm_sqr()).sum();
    for _ in 0..max_iter {
        if rs_old.sqrt() <= tol * b_norm {
            break;
        }
        let ap = apply(&p);
        let denom = cdot(&p, &ap).re;
        if denom <= T::zero() {
            break;
        }
        let alpha = rs_old / denom;
        for i in 0..n {
            x[i] = x[i] + p[i] * alpha;
            r[i] = r[i] - ap[i] * alpha;
        }
        let rs_new: T = r.iter().map(|z| z.norm_sqr()).sum();
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + p[i] * beta;
        }
        rs_old = rs_new;
    }
    let rel = rs_old.sqrt() / b_norm;
    (x, rel)
}

/// Orthonormalizes the rows of `frame` (modified Gram-Schmidt); rows that
/// collapse numerically are rejected.
pub fn orthonormalize_rows<T: Real>(frame: &mut [Vec<Cplx<T>>]) -> Result<()> {
    for i in 0..frame.len() {
        for _pass in 0..2 {
            for j in 0..i {
                let proj = {
                    let (head, tail) = frame.split_at_mut(i);
                    cdot(&head[j], &tail[0])
                };
                let (head, tail) = frame.split_at_mut(i);
                for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                    *a = *a - *b * proj;
                }
            }
        }
        let norm = l2_norm(&frame[i]);
        if norm < T::of(1e-12) {
            return Err(Error::InvalidParameter(
                "degenerate frame in orthonormalization".into(),
            ));
        }
        let inv = T::one() / norm;
        for z in frame[i].iter_mut() {
            *z = *z * inv;
        }
    }
    Ok(())
}
