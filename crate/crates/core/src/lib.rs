//! Biometric signal detection and fail-closed privacy gating.

pub mod datasets;
pub mod distortion;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod features;
pub mod filter;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};
