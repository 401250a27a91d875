//! Cell-free massive MIMO power control for URLLC traffic with coexisting
//! ground users and UAVs.
//!
//! The pipeline runs in stages, one module each:
//!
//! - [`scenario`]: service area, AP/user placement, user-centric association
//! - [`channel`]: large-scale fading, Rician/Rayleigh small-scale fading
//! - [`estimation`]: pilot assignment and per-AP LMMSE channel estimation
//! - [`beamforming`]: partial zero-forcing, MRT/MRC and colocated ZF vectors
//! - [`rate`]: unified SINR coefficients and the finite-blocklength rate
//! - [`sco`]: the ICBA / IIA successive convex power-control algorithms
//! - [`harness`]: Monte-Carlo driver, configuration, statistics and output files

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod beamforming;
pub mod channel;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod rate;
pub mod rng;
pub mod scenario;
pub mod sco;

pub use error::{Error, Result};

/// Complex baseband sample type used throughout.
pub type C64 = num_complex::Complex64;
/// Dense complex column vector.
pub type CVector = nalgebra::DVector<C64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
