//! Graph-level anomaly detection from gradient attention maps of a
//! variational graph autoencoder.
//!
//! A [`vgae::VgaeModel`] is trained on normal graphs only. At scoring time
//! [`scorer`] differentiates the pooled latent code with respect to the node
//! embeddings; the resulting attention map weighs each node, and the summed
//! node scores rank graphs. [`oracle`] gives exact score distributions for
//! the identity-weight model, and [`eval`] runs the one-class protocol.

pub mod cli;
pub mod error;
pub mod eval;
pub mod graph;
pub mod nn;
pub mod oracle;
pub mod scorer;
pub mod vgae;

pub use error::{GramError, Result};
