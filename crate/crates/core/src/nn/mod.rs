//! Dense numerical substrate: matrices, a reverse-mode tape, layers and Adam.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod layers;
pub mod matrix;
pub mod tape;

pub use activation::Activation;
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use layers::{
    forward, init_params, validate_chain, ForwardCtx, InitScheme, LayerKind, LayerSpec, Mode,
    Params, Sequential,
};
pub use matrix::Matrix;
pub use tape::{Gradients, Tape, Var};
