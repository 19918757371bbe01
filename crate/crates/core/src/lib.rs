//! Dual-octave complex-valued network for accelerated parallel MRI
//! reconstruction.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor`] – real/complex tensors, convolution, pooling, FFTs and a
//!   finite-difference gradient oracle.
//! * [`octconv`] – complex convolution, frequency split/merge and the
//!   four-group dual-octave layer with analytic backward passes.
//! * [`network`] – dense dual-octave blocks, k-space data fidelity, the
//!   unrolled cascade, the ℓ1 objective and checkpoints.
//! * [`sim`] – phantoms, coil sensitivities, undersampling masks and the
//!   multi-coil acquisition model.
//! * [`train`] – initialisation, Adam and the deterministic training loop.
//! * [`metrics`] – coil combination, PSNR/SSIM, evaluation reports.
//!
//! Inner loops run on rayon when the `parallel` feature is enabled (the
//! default). Work is always partitioned by output element, so results do
//! not depend on the thread count.

pub mod error;
pub mod metrics;
pub mod network;
pub mod octconv;
pub mod par;
pub mod scalar;
pub mod sim;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use scalar::{Precision, Scalar};
pub use tensor::{ComplexTensor, RealTensor};
