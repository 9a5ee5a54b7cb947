//! Numerical toolkit for a delayed glucose-insulin regulation model.
//!
//! The toolkit studies one family of two-component delay differential
//! systems — insulin-like and glucose-like variables coupled through monotone
//! nonlinearities, with the past insulin level driving glucose production —
//! together with the one-dimensional limiting map that governs its long-run
//! behaviour when the delay dominates every other time scale.
//!
//! Module map:
//! - [`functions`]: the catalogue of monotone scalar nonlinearities and the
//!   structural-hypothesis validator;
//! - [`model`]: system assembly for the four variants, equilibrium location,
//!   zero-translation, linearization coefficients, right-hand sides;
//! - [`intervalmap`]: the limiting map `Φ = F⁻¹∘H`, nested squeezing
//!   intervals, 2-cycles, regime classification, persistence bounds, and the
//!   scalar difference-equation diagnostic;
//! - [`chareq`]: the transcendental characteristic equation — real roots,
//!   the leading complex pair, band root counts, small-`1/τ` asymptotics;
//! - [`ddesim`]: delay integration (adaptive embedded Runge–Kutta plus fixed
//!   RK4/Euler) with barycentric-Lagrange history interpolation;
//! - [`analysis`]: oscillation diagnostics, sweeps, multistability census,
//!   and map-vs-simulation consistency checks;
//! - [`config`]: the text config format shared by the test corpus and the
//!   command-line driver.

pub mod analysis;
pub mod chareq;
pub mod config;
pub mod ddesim;
pub mod error;
pub mod functions;
pub mod intervalmap;
pub mod model;

pub use error::{Error, Result};
