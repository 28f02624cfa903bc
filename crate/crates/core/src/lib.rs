//! Controlled-sparsity multiple kernel learning.
//!
//! Learns a combination `sum_j gamma_j K_j` of precomputed kernels jointly
//! with an SVM, where the weights live on the capped simplex
//! `{sum(gamma) = t, 0 <= gamma <= 1}`. The integer `t` sets how many
//! kernels the solution selects.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod mkl;
pub mod svm;

pub use error::{Error, ErrorKind, FormatError, Result};
