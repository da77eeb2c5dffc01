//! Harness for neural network verification competitions: VNN-LIB
//! specifications, ONNX inference, counterexample checks, tool runs,
//! scoring and reports, plus a small interval-arithmetic baseline verifier.

pub mod baseline;
pub mod cex;
pub mod cli;
pub mod config;
pub mod onnx;
pub mod report;
pub mod runner;
pub mod scoring;
pub mod specfmt;
pub mod synth;
