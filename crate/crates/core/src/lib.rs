//! Moment estimation of merit parameters in paired comparison models.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod estimator;
pub mod graph;
pub mod inference;
pub mod kantorovich;
pub mod linalg;
pub mod links;
pub mod rng;
pub mod simulate;
