//! Desk-scale proof-of-training: honest training records, forgery attacks,
//! and a verifier that distills synthetic data by matching the recorded
//! trajectory and then scores proofs by how well that data trains fresh models.
//!
//! The crate is `no_std` + `alloc`; everything here is pure computation.
//! File formats, the CLI, and wall-clock metering live in the `pott` crate.
//!
//! Module map:
//! - [`tensor`], [`autodiff`]: dense f64 tensors, a reverse-mode tape whose
//!   backward pass emits graph nodes (so gradients of gradients work), and
//!   the unrolled meta-gradient used for data synthesis.
//! - [`models`]: flat-parameter linear/MLP classifiers and seeded inits.
//! - [`record`]: training records, proofs, and the structural checker.
//! - [`trainer`]: checkpointed SGD with bounded noise, plus cost metering.
//! - [`attacks`]: the four forgery families and the weak baseline mutations.
//! - [`distill`]: trajectory-matching synthesis of a small synthetic dataset.
//! - [`verifier`]: the three-stage verification pipeline and baselines.
//! - [`infoprobe`]: exact mutual-information accounting on toy processes.
//! - [`tasks`]: the built-in toy classification tasks.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attacks;
pub mod autodiff;
pub mod distill;
pub mod fmath;
pub mod infoprobe;
pub mod models;
pub mod record;
pub mod seed;
pub mod tasks;
pub mod tensor;
pub mod trainer;
pub mod verifier;
