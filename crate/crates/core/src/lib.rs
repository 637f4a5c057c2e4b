//! Entanglement negativity of two-qubit states estimated from two-copy
//! collective measurements.
//!
//! The crate covers the whole pipeline: sampling random states
//! ([`states`]), simulating the collective measurement ([`measurement`]),
//! building datasets ([`datasets`]), and fitting predictors that map the
//! measured probabilities to negativity ([`models`]).

pub mod datasets;
pub mod linalg;
pub mod measurement;
pub mod models;
pub mod report;
pub mod states;

pub use linalg::{ComplexMatrix, LinalgError, Subsystem};
pub use measurement::{FeatureVector, MeasurementConfig, MeasurementError};
pub use states::{DensityMatrix, FourQubitState, StateError};
