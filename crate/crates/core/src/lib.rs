//! Recursive (IIR) low-pass smoothers and differentiators with tunable delay.
//!
//! Filters are derived from discounted least-squares regression: a local
//! polynomial model is fitted to the recent past of a signal under an
//! exponential weight `m^kappa * exp(sigma * m)`, using a basis of discrete
//! (associated) Laguerre polynomials, and the fitted polynomial (or one of its
//! derivatives) is evaluated `q` samples back. The fit and the evaluation fold
//! into a single rational transfer function with a repeated real pole at
//! `p = exp(sigma)`, which is then run as a linear difference equation.
//!
//! Modules:
//!
//! - [`design`]: weights, orthonormal bases, coefficient derivation and the
//!   closed-form `B = 2` coefficient sets.
//! - [`response`]: frequency response, group delay, flatness, Nyquist gain and
//!   white-noise gain.
//! - [`runtime`]: streaming, two-pass, separable 2-D and per-pixel temporal
//!   filtering, plus signal/image file formats.
//! - [`flow`]: gradient-based optical flow and a moving-target disparity map
//!   built on the derivative filters.
//! - [`acceptance`]: the self-verification suite shared by the test target and
//!   the command-line `selftest`.

pub mod acceptance;
pub mod design;
mod error;
pub mod flow;
pub(crate) mod poly;
pub mod response;
pub mod runtime;
pub mod synthetic;

pub use error::{Error, Result};
