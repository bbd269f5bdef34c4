//! Network building blocks expressed as graph operations, plus parameter
//! storage, initialisation, the Adam optimiser and checkpoints.

mod adam;
pub mod checkpoint;
mod init;
mod layers;
mod params;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use init::{init_network, InitSpec};
pub use layers::{adaptive_max_pool, add_bias, causal_dilated_conv, dense, ConvLayerSpec};
pub use params::{Architecture, BlockSpec, NetworkParams, ParamBlock, ParamKind, ParamLeaves};
