//! Diverging-wave ultrasound reconstruction workbench.
//!
//! The crate covers the whole chain: synthetic phantoms and steered
//! diverging-wave acquisitions ([`ussim`]), coherent compounding and B-mode
//! formation ([`recon`]), a from-scratch convolutional network with maxout and
//! inception layers ([`nncore`], [`model`]), its training loop ([`trainer`]),
//! image-quality metrics ([`metrics`]), and the per-pixel inception
//! attribution study ([`analysis`]).

mod error;
mod kernels;

pub mod analysis;
pub mod io;
pub mod metrics;
pub mod model;
pub mod nncore;
pub mod recon;
pub mod tensor;
pub mod trainer;
pub mod ussim;

pub use error::{Error, Result};
pub use model::{BuiltinModel, Checkpoint, ModelConfig};
pub use tensor::{DType, Element, Tensor};
pub use ussim::{AcquisitionConfig, PolarGrid, ProbeConfig, RfImage, RfStack, Sample, SequenceConfig};
