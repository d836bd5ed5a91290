//! Learning from fine-grained labels with structured errors.
//!
//! The crate is `no_std` (with `alloc`) and holds every algorithmic piece:
//! the labeled-data model, seeded corruption injectors, synthetic corpus
//! generators, a linear-chain CRF and a windowed patch classifier as base
//! models, the shared per-element error-correcting network, the baseline
//! strategies and the evaluation metrics. File formats, the experiment
//! runner and the CLI live in the `ecn-lab` companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod base;
pub mod baselines;
pub mod corruption;
pub mod crf;
pub mod data;
pub mod digest;
pub mod ecn;
mod error;
pub mod features;
pub mod math;
pub mod metrics;
pub mod mlp;
pub mod optim;
pub mod patch;
pub mod rng;
pub mod synth;

pub use crate::error::{Error, Result};
