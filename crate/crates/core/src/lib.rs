//! System identification of incrementally dissipative operators from input/output data.
//!
//! Data are scattered through a factorization of a supply rate, a contraction is fitted
//! in a vector-valued RKHS with a norm constraint, and the identified model is simulated
//! by inverting the scattering with a Picard iteration.

pub mod error;
pub mod hodgkin;
pub mod inversion;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod pipeline;
pub mod probes;
pub mod rkhs;
pub mod signals;
pub mod supply;

pub use error::{Error, Result};
pub use inversion::{contraction_margin, simulate_r, LipschitzOperator, PicardOptions, ScatteredModel};
pub use kernels::{Certificate, OperatorKernel, OutputWeight, ScalarKernel};
pub use rkhs::{fit, tune_gamma, FitOptions, FittedOperator};
pub use signals::{Dataset, Quadrature, Scaling, Signal, SignalOperator, TimeGrid};
pub use supply::{ScatteringFactors, SupplyRate, SupplySpec};
