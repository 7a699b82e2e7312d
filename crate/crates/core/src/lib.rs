//! Density-matrix simulation of liquid-state NMR quantum information
//! processing: weakly coupled spin registers, pulse sequences, composite
//! pulses, optimal control, pseudo-pure state preparation, relaxation,
//! spectral readout and small quantum algorithms.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below fix the scalar to `f64`.

// `!(x > 0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod algorithms;
pub mod channels;
pub mod error;
pub mod events;
pub mod gates;
pub mod grape;
pub mod linalg;
pub mod prep;
pub mod pulses;
pub mod readout;
pub mod scalar;
pub mod spin;

pub use error::{Error, Result};
pub use linalg::Mat;
pub use scalar::Real;
pub use spin::{DensityMatrix, Ket, ProductOperatorExpansion, SpinSystem};

pub type Mat64 = Mat<f64>;
pub type Ket64 = Ket<f64>;
pub type DensityMatrix64 = DensityMatrix<f64>;
pub type SpinSystem64 = SpinSystem<f64>;
pub type Expansion64 = ProductOperatorExpansion<f64>;
pub type Mat32 = Mat<f32>;
pub type DensityMatrix32 = DensityMatrix<f32>;
