//! Discrete bidomain operators, spectral Galerkin dynamics and time-periodic
//! solutions for cardiac ionic models.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments)]

pub mod certificate;
pub mod conductivity;
pub mod config;
pub mod dynamics;
pub mod eigenbasis;
pub mod error;
pub mod estimates;
pub mod forcing;
pub mod grid;
pub mod integrator;
pub mod ionic;
pub mod norms;
pub mod operators;
pub mod output;
pub mod periodic;
pub mod poly;
pub mod problem;
pub mod quadrature;
pub mod run;
pub mod sparse;
pub mod verification;

pub use error::{BidomainError, Result};
