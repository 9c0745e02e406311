#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! A small laboratory for mathematical programs with complementarity
//! constraints (MPCCs):
//!
//! ```txt
//!     min  f(x, y, w, z)
//!     s.t. x in X (a box)
//!          F(x, y, w, z) = 0
//!          0 <= y  _|_  w >= 0
//! ```
//!
//! The crate provides the penalty interior-point algorithm ([`pipa`]), a
//! variant whose trust-region radius is driven by the ratio of actual to
//! predicted reduction ([`trpipa`]), the direction-finding QP and its
//! active-set solver ([`subqp`]), and tooling that certifies (non)stationarity
//! of the limits the two drivers produce ([`analysis`]).

pub mod analysis;
pub mod error;
pub mod model;
pub mod numerics;
pub mod pipa;
pub mod subqp;
pub mod trpipa;

pub use error::{Error, Result};
pub use model::{MpccProblem, Point};
pub use pipa::{pipa_solve, PipaConfig, SolveOutcome, SolveStatus, TraceRecord};
pub use trpipa::{trpipa_solve, TrConfig};
