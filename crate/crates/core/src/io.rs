//! `DWT1` tensor files and dataset manifests.
//!
//! Tensor layout: magic `DWT1`, one dtype byte (0 = f32, 1 = f64), one byte
//! holding the number of dimensions, each extent as a little-endian `u32`,
//! then the row-major little-endian payload.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DType, Element, Tensor};
use crate::trainer::{Dataset, Split};
use crate::ussim::{AcquisitionConfig, PhantomKind, RfImage, RfStack, Sample};

pub const TENSOR_MAGIC: &[u8; 4] = b"DWT1";

pub fn tensor_to_bytes<T: Element>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(6 + 4 * t.ndim() + t.len() * T::DTYPE.size());
    out.extend_from_slice(TENSOR_MAGIC);
    out.push(T::DTYPE.code());
    out.push(t.ndim() as u8);
    for &d in t.dims() {
        let d = u32::try_from(d).map_err(|_| Error::format(format!("extent {d} exceeds u32")))?;
        out.extend_from_slice(&d.to_le_bytes());
    }
    for &v in t.data() {
        v.write_le(&mut out);
    }
    Ok(out)
}

/// Parses a tensor, converting the stored element type to `T`.
pub fn tensor_from_bytes<T: Element>(bytes: &[u8]) -> Result<Tensor<T>> {
    if bytes.len() < 6 || &bytes[..4] != TENSOR_MAGIC {
        return Err(Error::format("not a DWT1 tensor file"));
    }
    let dtype = DType::from_code(bytes[4])?;
    let ndim = bytes[5] as usize;
    let body = &bytes[6..];
    if body.len() < 4 * ndim {
        return Err(Error::format("tensor file truncated inside its extents"));
    }
    let dims: Vec<usize> = body[..4 * ndim]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")) as usize)
        .collect();
    let payload = &body[4 * ndim..];
    let count: usize = dims.iter().product();
    if payload.len() != count * dtype.size() {
        return Err(Error::format(format!(
            "tensor payload holds {} bytes, extents {dims:?} need {}",
            payload.len(),
            count * dtype.size()
        )));
    }
    let data = payload
        .chunks_exact(dtype.size())
        .map(|c| match dtype {
            DType::F32 => T::from_f64(f32::read_le(c) as f64),
            DType::F64 => T::from_f64(f64::read_le(c)),
        })
        .collect();
    Tensor::from_vec(&dims, data)
}

pub fn write_tensor<T: Element>(path: impl AsRef<Path>, t: &Tensor<T>) -> Result<()> {
    fs::write(path, tensor_to_bytes(t)?)?;
    Ok(())
}

pub fn read_tensor<T: Element>(path: impl AsRef<Path>) -> Result<Tensor<T>> {
    tensor_from_bytes(&fs::read(path)?)
}

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitLabel {
    Train,
    Val,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleEntry {
    pub id: String,
    /// Paths relative to the manifest's directory.
    pub x: String,
    pub y: String,
    pub kind: PhantomKind,
    pub phantom_seed: u64,
    pub split: SplitLabel,
}

/// Index of a simulated dataset on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    /// Factor already applied to every stored X and Y (raw RF × scale).
    pub rf_scale: f64,
    /// How Y was formed from the per-transmit images.
    pub compounding: String,
    /// Steering angles (radians) of the X channels, in order.
    pub input_angles: Vec<f64>,
    pub acquisition: AcquisitionConfig,
    pub samples: Vec<SampleEntry>,
}

impl Manifest {
    pub fn validate(&self, root: &Path) -> Result<()> {
        if self.format_version != MANIFEST_VERSION {
            return Err(Error::format(format!(
                "manifest version {} (expected {MANIFEST_VERSION})",
                self.format_version
            )));
        }
        let mut ids: Vec<&str> = self.samples.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format("manifest sample ids are not unique"));
        }
        for s in &self.samples {
            for f in [&s.x, &s.y] {
                if !root.join(f).is_file() {
                    return Err(Error::format(format!("manifest references missing file {f}")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let m: Manifest = serde_json::from_slice(&fs::read(path)?)
            .map_err(|e| Error::format(format!("manifest {}: {e}", path.display())))?;
        m.validate(&manifest_root(path))?;
        Ok(m)
    }

    pub fn split(&self) -> Split {
        let mut split = Split::default();
        for (i, s) in self.samples.iter().enumerate() {
            match s.split {
                SplitLabel::Train => split.train.push(i),
                SplitLabel::Val => split.val.push(i),
                SplitLabel::Test => split.test.push(i),
            }
        }
        split
    }

    pub fn load_sample(&self, root: &Path, index: usize) -> Result<Sample> {
        let e = &self.samples[index];
        let x = RfStack::new(read_tensor(root.join(&e.x))?, self.input_angles.clone())?;
        let y = RfImage::new(read_tensor(root.join(&e.y))?)?;
        Ok(Sample { x, y })
    }

    /// Reads every sample into memory.
    pub fn load_dataset(&self, root: &Path) -> Result<Dataset> {
        let samples = (0..self.samples.len())
            .map(|i| self.load_sample(root, i))
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(samples, self.split())
    }
}

/// Directory the manifest's relative paths resolve against.
pub fn manifest_root(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
