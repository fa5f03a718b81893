//! Sparse polynomial chaos (PC) recovery from random samples.
//!
//! The crate builds orthonormal Legendre PC bases, assembles measurement
//! matrices, and recovers coefficient vectors by basis pursuit denoising
//! (BPDN), its weighted variant, and iteratively re-weighted ℓ1. Supporting
//! modules generate a-priori weights from coefficient-decay bounds, select the
//! BPDN tolerance by cross-validation, provide Karhunen–Loève random fields and
//! a 1-D stochastic elliptic forward model, and compute recovery-theory
//! quantities (restricted isometry and null-space constants) at desk scale.
//!
//! Numerical kernels are generic over a [`Real`] scalar (`f32` or `f64`);
//! the forward models and the experiment driver work in `f64`. Concrete
//! aliases for both precisions are exported at the crate root.

// `!(x > 0.0)` deliberately rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cross_validation;
pub mod elliptic;
pub mod error;
pub mod experiment;
pub mod pc_basis;
pub mod quadrature;
pub mod random_field;
pub mod solvers;
pub mod theory;
pub mod weights;

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display, LowerExp};

pub use error::{Error, Result};

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Scalar type accepted by the numerical kernels.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + serde::Serialize
    + serde::de::DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Infallible for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <Self as ToPrimitive>::to_f64(&self).expect("finite conversion to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type MeasurementSet64 = pc_basis::MeasurementSet<f64>;
pub type MeasurementSet32 = pc_basis::MeasurementSet<f32>;
pub type WeightVector64 = solvers::WeightVector<f64>;
pub type WeightVector32 = solvers::WeightVector<f32>;
pub type RecoveryResult64 = solvers::RecoveryResult<f64>;
pub type RecoveryResult32 = solvers::RecoveryResult<f32>;
pub type CvResult64 = cross_validation::CvResult<f64>;
pub type NullSpaceConstants64 = theory::NullSpaceConstants<f64>;
pub type RicEstimate64 = theory::RicEstimate<f64>;

pub use cross_validation::{select_epsilon, CvResult};
pub use pc_basis::{
    assemble, basis_cardinality, build_basis, eval_basis, eval_legendre_1d, inf_norm,
    MeasurementSet, MultiIndex, OrderedBasis,
};
pub use solvers::{
    least_squares, solve_bpdn, solve_reweighted, solve_weighted_bpdn, weighted_least_squares,
    RecoveryResult, WeightProvenance, WeightVector,
};
