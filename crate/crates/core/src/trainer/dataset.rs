use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};
use crate::ussim::Sample;

/// Indices of the train, validation and test samples.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// 5 : 1 : 1.
pub const DEFAULT_FRACTIONS: [f64; 3] = [5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0];

/// Seeded permutation of `0..n` cut into train/val/test parts.
///
/// Validation and test sizes are rounded; train takes the rest.
pub fn split_indices(n: usize, fractions: [f64; 3], seed: u64) -> Result<Split> {
    if fractions.iter().any(|f| !(*f >= 0.0)) || (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split fractions {fractions:?} must be non-negative and sum to 1")));
    }
    let val = (n as f64 * fractions[1]).round() as usize;
    let test = (n as f64 * fractions[2]).round() as usize;
    let train = n.checked_sub(val + test).unwrap_or(0);
    if train == 0 || val == 0 || test == 0 || train + val + test != n {
        return Err(Error::invalid(format!(
            "{n} samples cannot be split {fractions:?} without an empty part"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Split {
        train: order[..train].to_vec(),
        val: order[train..train + val].to_vec(),
        test: order[train + val..].to_vec(),
    })
}

/// In-memory samples with their split and a global amplitude scale.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub split: Split,
    /// Multiplies raw RF so that the largest |value| over every X and Y is 1.
    pub scale: f64,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, split: Split) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::invalid("dataset has no samples"))?;
        let dims = first.x.data.dims().to_vec();
        for s in &samples {
            if s.x.data.dims() != dims.as_slice() || s.y.data.dims() != &dims[1..] {
                return Err(Error::shape("dataset samples differ in grid size or transmit count"));
            }
        }
        let mut seen = vec![false; samples.len()];
        for &i in split.train.iter().chain(&split.val).chain(&split.test) {
            if i >= samples.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::invalid(format!("split index {i} is out of range or repeated")));
            }
        }
        let peak = samples
            .iter()
            .map(|s| s.x.data.max_abs().max(s.y.data.max_abs()))
            .fold(0.0, f64::max);
        if !(peak > 0.0 && peak.is_finite()) {
            return Err(Error::invalid("dataset amplitudes are all zero or non-finite"));
        }
        Ok(Self {
            samples,
            split,
            scale: 1.0 / peak,
        })
    }

    /// Splits `samples` with [`split_indices`].
    pub fn with_split(samples: Vec<Sample>, fractions: [f64; 3], seed: u64) -> Result<Self> {
        let split = split_indices(samples.len(), fractions, seed)?;
        Self::new(samples, split)
    }

    pub fn input_channels(&self) -> usize {
        self.samples[0].x.count()
    }

    /// Scaled `[B, m, h, w]` inputs and `[B, 1, h, w]` targets.
    pub fn batch<T: Element>(&self, indices: &[usize]) -> (Tensor<T>, Tensor<T>) {
        let s0 = &self.samples[indices[0]];
        let (m, h, w) = (s0.x.count(), s0.x.height(), s0.x.width());
        let scale = self.scale;
        let mut x = Vec::with_capacity(indices.len() * m * h * w);
        let mut y = Vec::with_capacity(indices.len() * h * w);
        for &i in indices {
            let s = &self.samples[i];
            x.extend(s.x.data.data().iter().map(|&v| T::from_f64(v * scale)));
            y.extend(s.y.data.data().iter().map(|&v| T::from_f64(v * scale)));
        }
        (
            Tensor::from_vec(&[indices.len(), m, h, w], x).expect("batch dims"),
            Tensor::from_vec(&[indices.len(), 1, h, w], y).expect("batch dims"),
        )
    }
}
