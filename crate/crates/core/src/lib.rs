//! Data-driven output-feedback stabilization of continuous-time LTI systems
//! from noisy input-output trajectories.
//!
//! The pipeline filters a measured trajectory through an observer of a
//! non-minimal realization of the plant, summarizes the filtered data in a
//! few moment matrices, and solves one robust LMI whose feasibility is
//! equivalent to stabilizing every realization consistent with the data.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// Links the system OpenBLAS used by the conic solver's dense PSD routines.
use openblas_src as _;

pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lmi;
pub mod moments;
pub mod noise;
pub mod parallel;
pub mod plant;
pub mod sdp;
pub mod signals;
pub mod sim;

pub use error::{Error, Result};
