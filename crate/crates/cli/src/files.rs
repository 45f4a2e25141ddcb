//! Config, JSON and tensor file helpers shared by the commands.

use std::path::Path;

use anyhow::{Context, Result};
use dwrecon_core::io::read_tensor;
use dwrecon_core::metrics::RoiSpec;
use dwrecon_core::model::{self, Checkpoint};
use dwrecon_core::ussim::PhantomKind;
use dwrecon_core::{AcquisitionConfig, RfStack};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::user_error;

pub const TARGETS_VERSION: u32 = 1;

/// Held-out phantoms kept as full transmit stacks for contrast and
/// resolution measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TargetSet {
    pub format_version: u32,
    pub targets: Vec<Target>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub kind: PhantomKind,
    pub phantom_seed: u64,
    /// `[n, h, w]` stack of every transmit, relative to this file, already
    /// multiplied by the dataset's RF scale.
    pub stack: String,
    pub rois: RoiSpec,
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Acquisition settings from a JSON file, or the desk-scale defaults.
pub fn acquisition_config(path: Option<&Path>) -> Result<AcquisitionConfig> {
    let config = match path {
        Some(p) => read_json(p, "acquisition config")?,
        None => AcquisitionConfig::desk(),
    };
    config.validate()?;
    Ok(config)
}

/// Reads a `[m, h, w]` stack (or a single `[h, w]` image). Angles are not
/// stored in tensor files; `angles` is used when its length fits, zeros otherwise.
pub fn read_stack(path: &Path, angles: &[f64]) -> Result<RfStack> {
    let t = read_tensor::<f64>(path).with_context(|| format!("reading {}", path.display()))?;
    let t = match t.ndim() {
        2 => {
            let d = t.dims().to_vec();
            t.reshape(&[1, d[0], d[1]])?
        }
        3 => t,
        n => return Err(user_error!("{} holds a {n}-D tensor, expected an RF stack", path.display())),
    };
    let m = t.dims()[0];
    let angles = if angles.len() == m { angles.to_vec() } else { vec![0.0; m] };
    Ok(RfStack::new(t, angles)?)
}

/// Loads a checkpoint of either precision for inference in double precision.
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint<f64>> {
    model::load::<f64>(path).with_context(|| format!("loading checkpoint {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
