//! The IDNet family: configs, parameter initialization, forward and backward
//! passes, and checkpoint files.

mod checkpoint;
mod config;
mod network;

pub use checkpoint::{
    from_bytes, load, load_expecting, save, stored_dtype, to_bytes, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{
    builtin_config, Activation, BuiltinModel, ConvSpec, LayerKind, LayerSpec, ModelConfig, DESK_KERNELS,
};
pub use network::{
    backward, build, forward, forward_trace, zeros, ActivationCache, Checkpoint, CheckpointMeta,
    ForwardTrace, LayerParams,
};

use crate::error::Result;

/// Total weights plus biases of a config.
pub fn param_count(config: &ModelConfig) -> Result<usize> {
    config.param_count()
}
