//! Eigenvalue-based spectrum sensing with a small, fixed number of antennas.
//!
//! The crate covers the whole chain: drawing received samples, forming the
//! sample covariance and its eigenvalues, the maximum-eigenvalue (MED) and
//! condition-number (CND) statistics, their fixed-`K` limiting laws under both
//! hypotheses, threshold calibration, and Monte Carlo experiments comparing
//! theory against simulation (see [`harness`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detectors;
pub mod eigen;
pub mod error;
pub mod evaluation;
pub mod harness;
pub mod matrix;
pub mod quad;
pub mod rmt;
pub mod rng;
pub mod signal;

pub use error::{Result, SenseError};
pub use signal::ValueCase;
