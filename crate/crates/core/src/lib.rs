//! Multimodal sparse coding.
//!
//! Sparse encoders (OMP, LASSO), dictionary learning (K-SVD, online), joint
//! and cross-modal coding over concatenated modalities, deep stacks of
//! coding and pooling layers, plus the preprocessing and evaluation pieces
//! needed to run denoising and classification experiments.

pub mod cli;
pub mod deep;
pub mod dictionary;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod io;
pub mod linalg;
pub mod multimodal;
pub mod preprocess;
pub mod sparse;
pub mod tensor;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use sparse::{Regularizer, SolverConfig, SparseCode};
pub use tensor::{Matrix, Vector};
