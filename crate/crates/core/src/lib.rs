//! Numerics for fractional degenerate parabolic equations
//! `∂_t u + (f(u))_x + (−Δ)^{α/2} φ(u) = 0` in one space dimension.

// `!(x > 0.0)` is used on purpose so that NaN fails every positivity check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod grid;
pub mod harness;
pub mod entropy_solver;
pub mod levy;
pub mod moduli;
pub mod nonlinearity;
pub mod quadrature;
pub mod special;
pub mod spectral_oracle;
pub mod stable;

pub use error::{Error, Result};
pub use grid::GridFunction;
