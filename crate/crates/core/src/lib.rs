//! Traveling fronts and fast traveling pulses of the scalar neural field
//!
//! ```text
//! u_t = -u - q + ∫ K(x - y) H(u(y) - θ) dy
//! q_t = ε (u - γ q)
//! ```
//!
//! with a threshold nonlinearity and slow linear recovery.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod eigen;
pub mod error;
pub mod front;
pub mod jacobian;
pub mod kernels;
pub mod pulse;
pub mod quadrature;
pub mod simulator;
pub mod verification;

pub use error::{Error, Result};
