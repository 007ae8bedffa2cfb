//! Spike-aware adaptive optimizers, 4-bit fake quantization and a small
//! experiment harness for measuring training stability.

pub mod config;
pub mod error;
pub mod harness;
pub mod models;
pub mod optim;
pub mod quant;
pub mod tensor;
pub mod reference;
pub mod selftest;
