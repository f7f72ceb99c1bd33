//! Classical and quantum solvers for the periodic drift-diffusion equation.
//!
//! The crate is `no_std` (it only needs `alloc`) and is organised bottom-up:
//!
//! * [`dde`] and [`fft`]: the classical ground truth (analytic solution, FTCS
//!   stepping, spectral diagonalisation).
//! * [`circuit`]: a gate-level IR with register labels, provenance tags and
//!   ASAP depth measurement.
//! * [`synth`]: generators for state preparation, QFT, FABLE block encoding,
//!   oblivious amplitude amplification and the assembled pipeline.
//! * [`sim`]: exact statevector simulation, post-selection, shot sampling and
//!   error accounting.
//! * [`rebase`]: compiler passes into the supported native gate sets.
#![no_std]
#![forbid(unsafe_code)]
// `!(x > 0.0)` rejects NaN alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod circuit;
pub mod dde;
mod error;
pub mod fft;
pub mod linalg;
pub mod math;
pub mod rebase;
pub mod sim;
pub mod synth;

pub use error::{Error, Result};
pub use math::C64;
