//! Numerical core of the election-aware minute-bar forecaster: market data
//! alignment, feature assembly, political signals, the mixer network, its
//! training loop, ensembling, evaluation and the analyst-agent pipeline.
//!
//! Everything here is `no_std` + `alloc`; file formats, the CLI and the HTTP
//! backend live in the `edsmf` crate.
#![no_std]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod agents;
pub mod dataset;
pub mod ensemble;
pub mod evaluation;
pub mod experiment;
pub mod features;
pub mod market;
pub mod mixer;
pub mod political;
pub mod seed;
pub mod synth;
pub mod training;
