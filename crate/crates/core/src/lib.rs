//! Variable time-step θ-scheme for quasilinear parabolic differential
//! inclusions
//!
//! ```text
//! u'(t) + A(t, u(t)) + ι* F(t, ι u(t)) ∋ f(t),   u(0) = u₀,
//! ```
//!
//! posed on an evolution triple `V ⊂ H ⊂ V*` and discretized in space by
//! piecewise-linear elements on an interval. See the book under `book/` for
//! a narrative tour.

pub mod diagnostics;
pub mod error;
pub mod fem;
pub mod harness;
pub mod interpolants;
pub mod linalg;
pub mod multifunction;
pub mod operators;
pub mod quadrature;
pub mod stepper;
pub mod time_grid;

pub use error::{Error, Result};
