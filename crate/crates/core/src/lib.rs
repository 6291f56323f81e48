//! Sparse sampling recovery with greedy algorithms.
//!
//! This crate implements nonlinear recovery of functions from point samples:
//! the Weak Chebyshev Greedy Algorithm (WCGA) run in discrete `L_p` spaces
//! built on sampling point sets, together with the certification machinery
//! (universal-discretization checks, generalized restricted-isometry
//! estimates, incoherence and unconditionality constants) and the function
//! class generators and experiment pipelines needed to measure recovery
//! rates at desk scale.
//!
//! The numerical core is generic over the real scalar type via [`Real`]
//! (`f32` or `f64`); all function values and coefficients are complex.
//! Concrete `f64` aliases are exported at the crate root and are what the
//! CLI and the experiment pipelines use.

pub mod classes;
pub mod discretization;
pub mod error;
pub mod experiments;
pub mod greedy;
pub mod linalg;
pub mod lp;
pub mod points;
pub mod rng;
pub mod scalar;
pub mod tabulated;
pub mod trig;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex scalar over a [`Real`] type.
pub type Cplx<T> = num_complex::Complex<T>;

// Concrete f64 instantiations used by the CLI and the experiment drivers.
pub type PointSet64 = points::PointSet<f64>;
pub type DiscreteMeasure64 = points::DiscreteMeasure<f64>;
pub type SampledFunction64 = lp::SampledFunction<f64>;
pub type LpExponent64 = lp::LpExponent<f64>;
pub type CoefficientVector64 = trig::CoefficientVector<f64>;
pub type TabulatedSystem64 = tabulated::TabulatedSystem<f64>;
pub type SampledSystem64 = greedy::SampledSystem<f64>;
pub type GreedyTrace64 = greedy::GreedyTrace<f64>;
pub type ClassSpec64 = classes::ClassSpec<f64>;
