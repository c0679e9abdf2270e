#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Short-time Fourier and continuous wavelet transforms with reassignment.
//!
//! The STFT side uses Gaussian windows; the scale side uses extremal
//! wavelets of the affine group, for which the scalogram satisfies a first
//! order structure equation that several scale-time maps are built on.

pub use error::{Error, Result};

pub mod accumulate;
pub mod cwt;
pub mod error;
pub mod grid;
pub mod heisenberg;
pub mod parallel;
pub mod scalogram;
pub mod signal;
pub mod stats;
pub mod stft;
pub mod stft_reassign;
pub mod verify;
pub mod wavelet;
pub mod window;
