//! Time-varying multivariate statistical process control.
//!
//! A process whose normal operating point drifts over the day (a solar PV
//! plant, a batch reactor) cannot be monitored with one static PCA model.
//! This crate slices multi-day training logs by second-of-day, fits an
//! independent PCA model per slice, and monitors new data with Hotelling's
//! T² against an F-distribution control limit. Out-of-control points are
//! decomposed into per-variable contributions to name a root cause.
//!
//! Pipeline:
//!
//! ```text
//! ingest ──► preprocess ──► train (linalg, statfun) ──► persist
//!                                   │
//!                     monitor ◄─────┘──► diagnose
//! ```
//!
//! [`synthgen`] produces synthetic telemetry with injected faults that drives
//! the end-to-end tests, and [`cli`] wires everything into the `tmspc` binary.

pub mod cli;
pub mod diagnose;
pub mod error;
pub mod ingest;
pub mod linalg;
pub mod monitor;
pub mod persist;
pub mod plot;
pub mod preprocess;
pub mod statfun;
pub mod synthgen;
pub mod train;

pub use error::{Error, Result};

/// Number of one-second slices in a day.
pub const SECONDS_PER_DAY: usize = 86_400;
