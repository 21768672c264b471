//! Small dense numerical kernel.
//!
//! Everything the models need and nothing more: row-major matrices, the
//! `tanh(Wᵀx + b)` building block with its exact backward pass, a stabilized
//! softmax cross-entropy, Adam, initializers and a finite-difference gradient
//! checker. All kernels are generic over [`Real`] so the same code runs in
//! 32-bit for training and in 64-bit for gradient checks.
//!
//! Weight matrices are stored `d_in × d_out` and applied as `Wᵀx`, which keeps
//! the stored shapes identical to the written equations.

mod adam;
mod gradcheck;
mod init;
mod layers;
mod loss;
mod matrix;
mod params;
mod real;

pub use adam::{adam_step, Adam, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GradCheckReport};
pub use init::{normal_init, xavier_init, xavier_init_with, RngSeed};
pub use layers::{
    affine_tanh, affine_tanh_backward, sigmoid, AffineTanhGrads,
};
pub(crate) use layers::{affine_tanh_backward_acc, affine_tanh_unchecked};
pub use loss::{log_softmax_at, softmax, softmax_xent, softmax_xent_backward};
pub use matrix::{axpy, dot, Matrix};
pub use params::ParamSet;
pub use real::Real;
