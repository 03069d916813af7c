//! Link-level workbench for CDL channel-type identification from eigen
//! features.
//!
//! The crate synthesizes CDL-A..E mmWave MIMO channel realizations, extracts
//! per-resource-block eigen features (U, S) via complex SVD, and trains a
//! lightweight dual-branch classifier against a full-CSI baseline. See the
//! module docs for the individual pieces:
//!
//! - [`channel`]: CDL channel synthesis (UPA steering, cluster/ray structure,
//!   Doppler) and the LOS-probability utility.
//! - [`eigen`]: deterministic complex SVD, per-RB feature extraction, and the
//!   SVD precoding/de-precoding algebra.
//! - [`nn`]: minimal tensor/backprop engine, the two model builders, training,
//!   and parameter/FLOP accounting.
//! - [`dataset`]: dataset generation, AWGN injection, stratified splitting,
//!   and bit-exact serialization.

pub mod channel;
pub mod dataset;
pub mod eigen;
pub mod error;
pub mod nn;
pub mod seeding;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
