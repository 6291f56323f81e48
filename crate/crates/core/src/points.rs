//! Sample point sets on the d-torus and the discrete measures they carry.

use std::io::{BufRead, Write};
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::stream;
use crate::scalar::Real;

/// `m` sample points in `[0, 2π)^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet<T: Real> {
    dim: usize,
    /// Flat row-major storage: point `j` occupies `points[j*dim .. (j+1)*dim]`.
    coords: Vec<T>,
}

impl<T: Real> PointSet<T> {
    pub fn new(dim: usize, coords: Vec<T>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                context: "point coordinates",
                expected: dim,
                got: coords.len(),
            });
        }
        let tau = T::TAU();
        if coords.iter().any(|&x| x < T::zero() || x >= tau) {
            return Err(Error::InvalidParameter(
                "coordinates must lie in [0, 2*pi)".into(),
            ));
        }
        Ok(Self { dim, coords })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points m.
    pub fn count(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn point(&self, j: usize) -> &[T] {
        &self.coords[j * self.dim..(j + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[T]> {
        self.coords.chunks_exact(self.dim)
    }

    /// Concatenation, used to realize mixed measures on one support.
    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                context: "point set concat",
                expected: self.dim,
                got: other.dim,
            });
        }
        let mut coords = self.coords.clone();
        coords.extend_from_slice(&other.coords);
        Ok(Self {
            dim: self.dim,
            coords,
        })
    }

    /// Writes one point per row, coordinates comma-separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for p in self.iter() {
            let row: Vec<String> = p.iter().map(|x| format!("{}", x)).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut coords = Vec::new();
        let mut dim = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let vals: Vec<T> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {}", lineno + 1, e)))
                        .map(T::of)
                })
                .collect::<Result<_>>()?;
            match dim {
                None => dim = Some(vals.len()),
                Some(d) if d != vals.len() => {
                    return Err(Error::Parse(format!(
                        "line {}: expected {} coordinates, got {}",
                        lineno + 1,
                        d,
                        vals.len()
                    )))
                }
                _ => {}
            }
            coords.extend(vals);
        }
        let dim = dim.ok_or_else(|| Error::Parse("empty point file".into()))?;
        Self::new(dim, coords)
    }
}

/// `m` i.i.d. uniform points on `[0, 2π)^d` from the stream keyed by `seed`.
///
/// Point `j` is drawn from its own counter stream, so the set is identical
/// no matter how the draw is scheduled.
pub fn draw_random_points<T: Real>(dim: usize, m: usize, seed: u64) -> Result<PointSet<T>> {
    if dim == 0 || m == 0 {
        return Err(Error::InvalidParameter(
            "need dim >= 1 and m >= 1 to draw points".into(),
        ));
    }
    let mut coords = Vec::with_capacity(m * dim);
    for j in 0..m {
        let mut rng = stream(seed, "points", j as u64);
        for _ in 0..dim {
            let x: f64 = rng.random::<f64>() * std::f64::consts::TAU;
            // random() < 1.0, so x < TAU holds exactly.
            coords.push(T::of(x));
        }
    }
    PointSet::new(dim, coords)
}

/// Tensor-product uniform grid with `per_axis` nodes on each axis.
pub fn uniform_grid<T: Real>(dim: usize, per_axis: usize) -> Result<PointSet<T>> {
    if dim == 0 || per_axis == 0 {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let n = per_axis
        .checked_pow(dim as u32)
        .ok_or_else(|| Error::InvalidParameter("grid too large".into()))?;
    let step = T::TAU() / T::of(per_axis as f64);
    let mut coords = Vec::with_capacity(n * dim);
    let mut idx = vec![0usize; dim];
    for _ in 0..n {
        for &i in idx.iter() {
            coords.push(step * T::of(i as f64));
        }
        for a in (0..dim).rev() {
            idx[a] += 1;
            if idx[a] < per_axis {
                break;
            }
            idx[a] = 0;
        }
    }
    PointSet::new(dim, coords)
}

/// Grid size rule used for quadrature of `L_p` norms of trigonometric
/// polynomials: oversample the highest frequency eightfold, never below 64.
pub fn quadrature_axis_size(max_frequency: usize) -> usize {
    (8 * (max_frequency + 1)).max(64)
}

/// A probability measure supported on a [`PointSet`].
#[derive(Debug, Clone)]
pub struct DiscreteMeasure<T: Real> {
    support: Arc<PointSet<T>>,
    weights: Vec<T>,
}

impl<T: Real> DiscreteMeasure<T> {
    /// Weights must sum to 1 within 1e-12.
    pub fn new(support: PointSet<T>, weights: Vec<T>) -> Result<Self> {
        if weights.len() != support.count() {
            return Err(Error::DimensionMismatch {
                context: "measure weights",
                expected: support.count(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|&w| w < T::zero()) {
            return Err(Error::InvalidParameter("weights must be nonnegative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::of(1e-12) {
            return Err(Error::InvalidParameter(format!(
                "weights sum to {}, expected 1",
                total
            )));
        }
        Ok(Self {
            support: Arc::new(support),
            weights,
        })
    }

    /// The empirical measure: every point gets weight 1/m.
    pub fn uniform(support: PointSet<T>) -> Self {
        let m = support.count();
        let w = T::one() / T::of(m as f64);
        Self {
            support: Arc::new(support),
            weights: vec![w; m],
        }
    }

    /// Quadrature measure for the normalized Lebesgue measure on the torus.
    pub fn quadrature(dim: usize, max_frequency: usize) -> Result<Self> {
        let grid = uniform_grid(dim, quadrature_axis_size(max_frequency))?;
        Ok(Self::uniform(grid))
    }

    /// The half/half mixture of two measures, realized on the concatenated
    /// support. With `a` a quadrature stand-in for a continuous measure and
    /// `b` an empirical measure this is the mixed measure used to compare
    /// recovery errors against best approximations.
    pub fn mixed(a: &Self, b: &Self) -> Result<Self> {
        let support = a.support.concat(&b.support)?;
        let half = T::of(0.5);
        let mut weights: Vec<T> = a.weights.iter().map(|&w| w * half).collect();
        weights.extend(b.weights.iter().map(|&w| w * half));
        Ok(Self {
            support: Arc::new(support),
            weights,
        })
    }

    pub fn support(&self) -> &PointSet<T> {
        &self.support
    }

    pub fn support_arc(&self) -> Arc<PointSet<T>> {
        Arc::clone(&self.support)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// True when every node carries the same weight (an empirical or plain
    /// quadrature measure, as opposed to a mixture).
    pub fn is_uniform(&self) -> bool {
        let w0 = self.weights[0];
        self.weights.iter().all(|&w| w == w0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draw_is_deterministic() {
        let a = draw_random_points::<f64>(1, 3, 42).unwrap();
        let b = draw_random_points::<f64>(1, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = draw_random_points::<f64>(1, 3, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn draw_covers_torus_uniformly() {
        // Empirical mean of the first coordinate must sit near pi within
        // 3 sigma = 3*(2*pi/sqrt(12))/sqrt(m).
        let m = 100_000;
        let pts = draw_random_points::<f64>(2, m, 7).unwrap();
        let mean: f64 = pts.iter().map(|p| p[0]).sum::<f64>() / m as f64;
        let sigma = std::f64::consts::TAU / 12f64.sqrt() / (m as f64).sqrt();
        assert!((mean - std::f64::consts::PI).abs() < 3.0 * sigma);
        assert!(pts
            .iter()
            .all(|p| p.iter().all(|&x| (0.0..std::f64::consts::TAU).contains(&x))));
    }

    #[test]
    fn uniform_grid_enumerates_tensor_product() {
        let g = uniform_grid::<f64>(2, 3).unwrap();
        assert_eq!(g.count(), 9);
        let step = std::f64::consts::TAU / 3.0;
        assert_eq!(g.point(0), &[0.0, 0.0]);
        assert_eq!(g.point(1), &[0.0, step]);
        assert_eq!(g.point(3), &[step, 0.0]);
    }

    #[test]
    fn measure_weight_validation() {
        let pts = draw_random_points::<f64>(1, 4, 0).unwrap();
        assert!(DiscreteMeasure::new(pts.clone(), vec![0.5, 0.5, 0.25, 0.25]).is_err());
        let ok = DiscreteMeasure::new(pts, vec![0.25; 4]).unwrap();
        assert_eq!(ok.len(), 4);
    }

    #[test]
    fn mixed_measure_halves_weights() {
        let a = DiscreteMeasure::uniform(draw_random_points::<f64>(1, 2, 1).unwrap());
        let b = DiscreteMeasure::uniform(draw_random_points::<f64>(1, 3, 2).unwrap());
        let m = DiscreteMeasure::mixed(&a, &b).unwrap();
        assert_eq!(m.len(), 5);
        let total: f64 = m.weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((m.weights()[0] - 0.25).abs() < 1e-15);
        assert!((m.weights()[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn csv_roundtrip() {
        let pts = draw_random_points::<f64>(2, 5, 3).unwrap();
        let mut buf = Vec::new();
        pts.write_csv(&mut buf).unwrap();
        let back = PointSet::<f64>::read_csv(buf.as_slice()).unwrap();
        assert_eq!(pts, back);
    }
}
