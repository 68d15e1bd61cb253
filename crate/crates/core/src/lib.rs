//! Leggett-Garg coherence tests for neutrino oscillation.
//!
//! The crate has three layers:
//!
//! * [`oscillation`] predicts standard three-flavor vacuum survival and
//!   transition probabilities, including bin-averaged ("flattened") values.
//! * [`gksl`] simulates Markovian open-system (Lindblad) dynamics on small
//!   Hilbert spaces and measures dichotomic observables on the result. It is
//!   what the product inequality `P(t1 + t2 + ...) >= P(t1) P(t2) ...` is
//!   checked against.
//! * [`lgi`] and [`montecarlo`] apply the three-point form of that inequality
//!   to `(L/E, P)` datasets: find correlated triads, count violations, and
//!   resample the data under its quoted uncertainties to get a violation-count
//!   distribution with confidence `mu / sigma`.
//!
//! Numerics are generic over [`Real`]; the `*64` aliases below fix the scalar
//! to `f64`, which is what the data pipeline and the CLI use.

// `!(x > 0.0)` style guards are there to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod constants;
pub mod data_io;
pub mod error;
pub mod gksl;
pub mod lgi;
pub mod montecarlo;
pub mod oscillation;
pub mod quadrature;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

pub type OscillationParams64 = oscillation::OscillationParams<f64>;
pub type PmnsMatrix64 = oscillation::PmnsMatrix<f64>;
pub type Oscillator64 = oscillation::Oscillator<f64>;
pub type DensityMatrix64 = gksl::DensityMatrix<f64>;
pub type DichotomicPvm64 = gksl::DichotomicPvm<f64>;
pub type Dissipator64 = gksl::Dissipator<f64>;
pub type Generator64 = gksl::Generator<f64>;
pub type EvolutionMap64 = gksl::EvolutionMap<f64>;
pub type DataPoint64 = lgi::DataPoint<f64>;
