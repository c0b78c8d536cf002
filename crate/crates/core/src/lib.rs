//! Contextual sarcasm detection core.
//!
//! The crate is `no_std` (with `alloc`) and holds every learning component of
//! the pipeline:
//!
//! - [`corpus`]: tokenization, vocabularies and per-user / per-forum documents.
//! - [`numerics`]: dense matrices, symmetric eigendecomposition, SVD, Adam and
//!   a finite-difference gradient checker.
//! - [`pvdm`]: paragraph vectors (distributed memory) with hierarchical softmax.
//! - [`textcnn`]: the single-layer three-height convolutional text encoder.
//! - [`personality`]: trait pretraining and per-user personality vectors.
//! - [`cca`]: canonical correlation fusion of stylometric and personality views.
//! - [`pipeline`]: context bank, hybrid classifier, evaluation and prediction.
//!
//! File formats, configuration and the command line live in the `cascade`
//! companion crate. Enabling the `std` feature adds the lock-free parallel
//! paragraph-vector trainer.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod cca;
pub mod corpus;
pub mod embedding;
mod error;
pub mod numerics;
pub mod personality;
pub mod pipeline;
pub mod provenance;
pub mod pvdm;
pub mod synthetic;
pub mod tensor;
pub mod textcnn;

pub use error::{Error, Result};
pub use numerics::{Matrix, Real};
