//! Graph-tensor completion toolkit.
//!
//! A graph-tensor is a third-order array whose k-th frontal slice is the
//! data matrix attached to node k of a weighted undirected graph. This crate
//! recovers entirely missing slices from the observed ones:
//!
//! - [`graph`]: graph ingestion and the orthogonal spectral transform built
//!   from the Laplacian eigenbasis.
//! - [`tensor`]: the dense [`tensor::GraphTensor`] type, the graph Fourier
//!   transform pair, per-slice SVD machinery, and singular-value shrinkage.
//! - [`solvers`]: the classical iterative imputation solver and a
//!   topology-oblivious TNN-ADMM baseline.
//! - [`net`]: an unrolled completion network (imputation, learned transform,
//!   soft-threshold, learned inverse, shortcut) with hand-written
//!   backpropagation and Adam training.
//! - [`data`]: dataset construction (feature-file ingestion, synthetic
//!   low-rank generators, mask sampling) and on-disk dataset layout.
//! - [`bench`]: the benchmark sweep backing the `gtc bench` subcommand.

pub mod bench;
pub mod data;
pub mod error;
pub mod graph;
pub mod net;
pub mod solvers;
pub mod tensor;

pub use error::{Error, Result};
