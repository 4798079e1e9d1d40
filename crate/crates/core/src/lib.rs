//! Parallel-connected neural networks (PNNs): FNNs whose output layers are summed into one
//! shared output, trained with SGD on MNIST, plus the measurements used to study how each
//! sub-network contributes to the whole.

pub mod activation;
pub mod arch;
pub mod checkpoint;
pub mod data;
pub mod error;
pub mod experiment;
pub mod linalg;
pub mod metrics;
pub mod network;
pub mod report;
pub mod rng;
pub mod selftest;
pub mod train;

pub use activation::ActivationKind;
pub use error::{PnnError, Result};
