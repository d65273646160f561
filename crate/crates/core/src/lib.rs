//! Graph anomaly detection with a spectral autoencoder.
//!
//! The encoder filters node attributes with a learnable Haar-wavelet spectral
//! filter over the normalized Laplacian; the attribute decoder inverts the
//! smoothing with a bank of polynomial Wiener deconvolution kernels. Two
//! auxiliary decoders reconstruct node degree and the feature distribution of
//! each node's neighborhood. The per-node weighted reconstruction loss is the
//! anomaly score.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, checkpoints and
//! the command-line tool live in the companion `grasped` crate.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`graph`] | undirected graphs, normalized adjacency / Laplacian |
//! | [`linalg`] | dense matrices, symmetric eigensolver, Cholesky |
//! | [`filters`] | Haar filter bank, diffusion operator, Wiener kernels |
//! | [`model`] | encoder, decoders, loss terms |
//! | [`train`] | gradients, Adam, training loop, scoring |
//! | [`bench`] | ROC-AUC, dataset statistics, anomaly injection, SBM graphs |

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod bench;
mod error;
pub mod filters;
pub mod graph;
pub mod hyper;
pub mod linalg;
pub(crate) mod math;
pub mod model;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use filters::{HaarFilterBank, WienerKernel};
pub use graph::{Graph, SparseSymMatrix};
pub use hyper::{AttrDecoderKind, EncoderKind, HyperParams};
pub use linalg::{Matrix, SpectralDecomposition};
pub use model::ModelParams;
pub use train::{score_nodes, train, TrainReport};
