//! Tabulated dictionaries: explicit values of `N` elements on a fixed grid.
//!
//! Used for uniformly bounded systems that are not trigonometric. Ingestion
//! accepts a CSV or JSON matrix; the file header carries the declared
//! uniform bound `B` and, when known, Riesz constants `R1 <= R2` and the
//! Bessel constant `K`. Values are never rescaled: carrying `B` is enough
//! because greedy runs are invariant under a global dictionary scaling.

use std::io::BufRead;

use num_complex::Complex;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::Cplx;

#[derive(Debug, Clone)]
pub struct TabulatedSystem<T: Real> {
    /// Row-major `N x M`: row = dictionary element, column = grid point.
    values: Vec<Vec<Cplx<T>>>,
    bound: T,
    riesz: Option<(T, T)>,
    bessel: Option<T>,
}

impl<T: Real> TabulatedSystem<T> {
    pub fn new(
        values: Vec<Vec<Cplx<T>>>,
        bound: T,
        riesz: Option<(T, T)>,
        bessel: Option<T>,
    ) -> Result<Self> {
        if values.is_empty() || values[0].is_empty() {
            return Err(Error::InvalidParameter("empty tabulated system".into()));
        }
        let m = values[0].len();
        if values.iter().any(|row| row.len() != m) {
            return Err(Error::DimensionMismatch {
                context: "tabulated rows",
                expected: m,
                got: values.iter().map(|r| r.len()).find(|&l| l != m).unwrap(),
            });
        }
        let tol = bound * T::of(1.0 + 1e-12);
        for row in &values {
            for z in row {
                if z.norm() > tol {
                    return Err(Error::InvalidParameter(format!(
                        "entry modulus {} exceeds declared bound {}",
                        z.norm(),
                        bound
                    )));
                }
            }
        }
        if let Some((r1, r2)) = riesz {
            if !(r1 > T::zero() && r1 <= r2) {
                return Err(Error::InvalidParameter(
                    "Riesz constants must satisfy 0 < R1 <= R2".into(),
                ));
            }
        }
        Ok(Self {
            values,
            bound,
            riesz,
            bessel,
        })
    }

    pub fn n_atoms(&self) -> usize {
        self.values.len()
    }

    pub fn n_points(&self) -> usize {
        self.values[0].len()
    }

    pub fn atom(&self, i: usize) -> &[Cplx<T>] {
        &self.values[i]
    }

    pub fn rows(&self) -> &[Vec<Cplx<T>>] {
        &self.values
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn riesz(&self) -> Option<(T, T)> {
        self.riesz
    }

    pub fn bessel(&self) -> Option<T> {
        self.bessel
    }

    /// CSV layout: first line `B=..[,R1=..][,R2=..][,K=..]`, then one line
    /// per element with interleaved `re,im` pairs, one pair per grid point.
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty tabulated file".into()))??;
        let mut bound = None;
        let mut r1 = None;
        let mut r2 = None;
        let mut bessel = None;
        for field in header.split(',') {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad header field '{}'", field)))?;
            let value: f64 = value
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("header field '{}': {}", field, e)))?;
            match key.trim() {
                "B" => bound = Some(T::of(value)),
                "R1" => r1 = Some(T::of(value)),
                "R2" => r2 = Some(T::of(value)),
                "K" => bessel = Some(T::of(value)),
                other => return Err(Error::Parse(format!("unknown header key '{}'", other))),
            }
        }
        let bound = bound.ok_or_else(|| Error::Parse("header must declare B".into()))?;
        let mut values = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let nums: Vec<f64> = line
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {}", lineno + 2, e)))
                })
                .collect::<Result<_>>()?;
            if nums.len() % 2 != 0 {
                return Err(Error::Parse(format!(
                    "line {}: odd number of reals, entries are re,im pairs",
                    lineno + 2
                )));
            }
            values.push(
                nums.chunks_exact(2)
                    .map(|c| Complex::new(T::of(c[0]), T::of(c[1])))
                    .collect(),
            );
        }
        let riesz = match (r1, r2) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(Error::Parse("R1 and R2 must be given together".into())),
        };
        Self::new(values, bound, riesz, bessel)
    }

    /// JSON layout mirroring the CSV: `{"b": .., "r1": .., "r2": .., "k": ..,
    /// "values": [[re, im, re, im, ...], ...]}`.
    pub fn read_json(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct File {
            b: f64,
            #[serde(default)]
            r1: Option<f64>,
            #[serde(default)]
            r2: Option<f64>,
            #[serde(default)]
            k: Option<f64>,
            values: Vec<Vec<f64>>,
        }
        let file: File = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let mut values = Vec::with_capacity(file.values.len());
        for (i, row) in file.values.iter().enumerate() {
            if row.len() % 2 != 0 {
                return Err(Error::Parse(format!(
                    "row {}: odd number of reals, entries are re,im pairs",
                    i
                )));
            }
            values.push(
                row.chunks_exact(2)
                    .map(|c| Complex::new(T::of(c[0]), T::of(c[1])))
                    .collect(),
            );
        }
        let riesz = match (file.r1, file.r2) {
            (Some(a), Some(b)) => Some((T::of(a), T::of(b))),
            (None, None) => None,
            _ => return Err(Error::Parse("r1 and r2 must be given together".into())),
        };
        Self::new(values, T::of(file.b), riesz, file.k.map(T::of))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_ingestion() {
        let text = "B=1.0,R1=0.5,R2=1.5\n1,0,0,0\n0,0,0,-1\n";
        let sys = TabulatedSystem::<f64>::read_csv(text.as_bytes()).unwrap();
        assert_eq!(sys.n_atoms(), 2);
        assert_eq!(sys.n_points(), 2);
        assert_eq!(sys.atom(1)[1], Complex::new(0.0, -1.0));
        assert_eq!(sys.riesz(), Some((0.5, 1.5)));
        assert_eq!(sys.bessel(), None);
    }

    #[test]
    fn bound_violation_is_rejected() {
        let text = "B=1.0\n2,0\n";
        assert!(TabulatedSystem::<f64>::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn bad_riesz_pair_is_rejected() {
        let text = "B=1.0,R1=1.5,R2=0.5\n1,0\n";
        assert!(TabulatedSystem::<f64>::read_csv(text.as_bytes()).is_err());
        let text = "B=1.0,R1=1.5\n1,0\n";
        assert!(TabulatedSystem::<f64>::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn json_ingestion() {
        let text = r#"{"b": 2.0, "k": 1.25, "values": [[1.0, 0.5, -0.25, 0.0]]}"#;
        let sys = TabulatedSystem::<f64>::read_json(text).unwrap();
        assert_eq!(sys.n_atoms(), 1);
        assert_eq!(sys.n_points(), 2);
        assert_eq!(sys.bessel(), Some(1.25));
        assert!(TabulatedSystem::<f64>::read_json(r#"{"b":1.0,"oops":2,"values":[]}"#).is_err());
    }
}
