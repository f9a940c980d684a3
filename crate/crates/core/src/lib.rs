//! Finite-volume laboratory for time-averaged quantum dynamics.
//!
//! The crate builds finite realizations of three classes of self-adjoint
//! operators (bounded dense Hermitian matrices, discrete Jacobi matrices on
//! a window of ℤ, and finite-difference Schrödinger operators on a box),
//! diagonalizes them exactly, and evaluates the time-averaged quantities
//! whose decay and growth rates are studied along time subsequences:
//!
//! - expectation values ⟨e^{-isT}ξ, A e^{-isT}ξ⟩ of compact observables and
//!   their Cesàro averages over [0, t],
//! - the time-averaged return probability and its correlation-dimension
//!   exponents,
//! - time-averaged position moments and transport exponents,
//! - sliding-window log-log slope envelopes standing in for liminf/limsup.
//!
//! Everything is deterministic given a seed; see [`rng`] for the stream
//! derivation and [`experiments`] for the persisted run records.

// `!(x <= bound)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod experiments;
pub mod forge;
pub mod hash;
pub mod measure;
pub mod metric;
pub mod observables;
pub mod operator;
pub mod rng;
pub mod scaling;
pub mod series;
pub mod tridiag;

mod cser;
mod par;

pub use faer::c64;

pub use error::{Error, Result};
pub use evolve::{EigenSystem, StateVector};
pub use measure::SpectralMeasure;
pub use observables::CompactObservable;
pub use operator::{ContinuumSchrodinger, DenseHermitian, JacobiOperator, Operator};
pub use scaling::{AlphaFunction, ScalingEstimate};
pub use series::{Quantity, TimeAverageSeries, TimeGrid};
