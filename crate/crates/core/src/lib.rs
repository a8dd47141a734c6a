//! Measure-valued Markov chains driven by Pólya sequences.
//!
//! The crate simulates the exchangeable-sequence chain `Q_n`, the block
//! generalization of the Feigin–Tweedie chain and its mean/functional and
//! density images, evaluates exact mixed moments of the Pólya distribution,
//! runs Newton's recursive mixing-density estimator, and provides drift,
//! small-set and innovation-density diagnostics.
//!
//! Simulation code is generic over [`Real`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`.

// `!(x > 0.0)` style checks are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod ergodicity;
pub mod error;
pub mod kernel;
pub mod measure;
pub mod moments;
pub mod newton;
pub mod polya;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod stats;

pub use error::{Error, Result};
pub use rng::{par_replicas, StreamRng};
pub use scalar::{MomentField, Real};

pub use num_rational::BigRational;

pub type BaseMeasure = measure::BaseMeasure<f64>;
pub type BaseFamily = measure::BaseFamily<f64>;
pub type WeightedDiscreteMeasure = measure::WeightedDiscreteMeasure<f64>;
pub type QnState = chains::QnState<f64>;
pub type FtKernel = chains::FtKernel<f64>;
pub type FtChainState = chains::FtChainState<f64>;
pub type ScalarChainState = chains::ScalarChainState<f64>;
pub type DensityGridState = chains::DensityGridState<f64>;
pub type Innovation = chains::Innovation<f64>;
pub type MomentQuery = moments::MomentQuery<f64>;
pub type ExactMomentQuery = moments::MomentQuery<BigRational>;
pub type NewtonState = newton::NewtonState<f64>;
pub type PredictiveUpdate = newton::PredictiveUpdate<f64>;
pub type GaussianKernel = kernel::GaussianKernel<f64>;
