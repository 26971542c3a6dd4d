//! Link-level simulation of affine frequency division multiplexing (AFDM).
//!
//! The crate is organised bottom-up:
//!
//! * [`waveform`]: constellations, the discrete affine Fourier transform and
//!   chirp-periodic-prefix framing.
//! * [`channel`]: doubly-selective channel synthesis, the time-domain and
//!   affine-frequency-domain channel matrices and their band structure.
//! * [`banded`]: real quasi-banded (cyclically banded) storage, pivot-free LU
//!   with corner blocks, truncated triangular inverses and the 2×2 block
//!   inverse of the EP equalization matrix.
//! * [`detect`]: the real-valued system embedding and the detectors, namely
//!   linear MMSE, a decision-feedback MRC baseline, AF-domain EP and
//!   time-domain EP.
//! * [`harness`]: experiment configuration, Monte-Carlo BER sweeps,
//!   multiplication accounting and CSV output.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod channel;
pub mod detect;
mod error;
pub mod flops;
pub mod harness;
pub mod waveform;

pub use error::{Error, Result};

/// Double precision complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
