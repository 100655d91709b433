//! Multiplexed Fourier ptychographic microscopy.
//!
//! A forward simulator for LED-array microscopes with multiplexed
//! illumination, the amplitude-based loss and its generalized Wirtinger
//! gradient, an analytical step size derived from the pupil overlap, and
//! Wirtinger Flow / Accelerated Wirtinger Flow reconstruction.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod fft;
pub mod field;
pub mod io;
pub mod objective;
pub mod optics;
pub mod phantom;
pub mod rng;
pub mod solver;

pub use error::{Error, FormatError, Result};
pub use fft::{fft2, ifft2};
pub use field::{Field2D, RealImage2D};
pub use num_complex::Complex64;
pub use rng::Rng;
