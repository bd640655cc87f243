//! Dense arithmetic, parameter storage, batch normalization and the
//! finite-difference gradient oracle.

pub mod activation;
pub mod batchnorm;
pub mod gradcheck;
pub mod linear;
pub mod matrix;
pub mod params;

pub use activation::{sigmoid, softmax, softmax_backward, softmax_rows};
pub use batchnorm::{normalize_batch, BatchNorm, BatchStats, BnCache, BnMode, RunningStats};
pub use gradcheck::{grad_check, grad_check_with, GradCheckReport};
pub use linear::Linear;
pub use matrix::{affine, affine_backward, axpy, dot, MatRef, Matrix};
pub use params::{Init, Param, ParamId, ParamStore};
