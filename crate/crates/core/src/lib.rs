//! Non-interactive locally differentially private empirical risk
//! minimization and query release.
//!
//! Players randomize once and send a single message. The server rebuilds a
//! polynomial surrogate of the empirical risk (Bernstein grid mechanisms) or
//! an unbiased stochastic gradient oracle (generalized linear losses) and
//! optimizes it, or answers whole query families from one private table.

// Parameter checks are written as `!(x > 0.0)` on purpose so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein_erm;
pub mod data;
pub mod error;
pub mod glm;
pub mod harness;
mod par;
pub mod polyapprox;
pub mod primitives;
pub mod query;
pub mod rng;
pub mod sigm;

pub use error::{LdpError, Result};
