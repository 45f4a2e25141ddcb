//! Which inception path drives each output pixel, and how that changes with depth.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{forward_trace, Activation, ActivationCache, Checkpoint, LayerParams};
use crate::tensor::Element;
use crate::ussim::RfStack;

/// How a path's share of the winning 1×1 kernel is scored.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribution {
    /// Sum of |coefficient × feature| over the path's channels.
    #[default]
    Activation,
    /// Sum of |coefficient| over the path's channels.
    Weight,
}

impl FromStr for Attribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "activation" => Ok(Self::Activation),
            "weight" => Ok(Self::Weight),
            _ => Err(Error::invalid(format!("unknown attribution mode '{s}'"))),
        }
    }
}

impl fmt::Display for Attribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Activation => "activation",
            Self::Weight => "weight",
        })
    }
}

/// Per-pixel index of the dominant inception path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActivationMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<u8>,
    /// Kernel size `[kh, kw]` of each path, indexed by label.
    pub legend: Vec<[usize; 2]>,
}

impl ActivationMap {
    pub fn new(height: usize, width: usize, labels: Vec<u8>, legend: Vec<[usize; 2]>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::shape(format!(
                "{} labels for a {height}×{width} map",
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize >= legend.len()) {
            return Err(Error::invalid(format!("label {l} but only {} paths", legend.len())));
        }
        Ok(Self {
            height,
            width,
            labels,
            legend,
        })
    }

    pub fn at(&self, row: usize, col: usize) -> usize {
        self.labels[row * self.width + col] as usize
    }
}

/// Percentage of pixels won by each path, per depth row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthContribution {
    /// `rows[r][p]` is the percent of row `r` labelled `p`.
    pub rows: Vec<Vec<f64>>,
    pub legend: Vec<[usize; 2]>,
}

impl DepthContribution {
    /// Mean share (percent) of `path` over rows `range`.
    pub fn mean_share(&self, path: usize, range: std::ops::Range<usize>) -> f64 {
        let n = range.len() as f64;
        range.map(|r| self.rows[r][path]).sum::<f64>() / n
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("row");
        for k in &self.legend {
            out.push_str(&format!(",{}x{}", k[0], k[1]));
        }
        out.push('\n');
        for (r, row) in self.rows.iter().enumerate() {
            out.push_str(&r.to_string());
            for v in row {
                out.push_str(&format!(",{v:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Labels each output pixel with the inception path contributing most to
/// the winning kernel of the final 1×1 layer.
///
/// `x` is raw RF; the checkpoint's input scale is applied first. Requires the
/// inception block to be the second-to-last layer and the last layer to be a
/// 1×1 convolution.
pub fn activation_map<T: Element>(ckpt: &Checkpoint<T>, x: &RfStack, mode: Attribution) -> Result<ActivationMap> {
    let n = ckpt.layers.len();
    let (Some(LayerParams::Inception(block)), Some(LayerParams::Conv(last))) =
        (n.checked_sub(2).map(|i| &ckpt.layers[i]), ckpt.layers.last())
    else {
        return Err(Error::config(format!(
            "model '{}' has no inception block before its output layer",
            ckpt.config.name
        )));
    };
    if last.kernel_h != 1 || last.kernel_w != 1 {
        return Err(Error::config("the output layer must be a 1×1 convolution"));
    }
    let pieces = match ckpt.config.layers[n - 2].activation {
        Activation::Maxout { pieces } => pieces,
        _ => 1,
    };
    // post-activation channel ranges of each path
    let groups: Vec<(usize, usize)> = block
        .channel_offsets()
        .iter()
        .zip(&block.paths)
        .map(|(&off, p)| (off / pieces, (off + p.num_kernels) / pieces))
        .collect();
    let legend: Vec<[usize; 2]> = block.paths.iter().map(|p| [p.kernel_h, p.kernel_w]).collect();
    if legend.len() > u8::MAX as usize {
        return Err(Error::config("too many inception paths"));
    }

    let mut input = x.to_batch::<T>();
    input.scale(T::from_f64(ckpt.meta.input_scale));
    let trace = forward_trace(ckpt, &input)?;
    let features = &trace.inputs[n - 1];
    let [_, channels, h, w] = features.dims4()?;
    let plane = h * w;
    let f = features.data();
    let weights = last.weights.data();
    let mut labels = vec![0u8; plane];
    for (pix, label) in labels.iter_mut().enumerate() {
        let winner = match &trace.activations[n - 1] {
            ActivationCache::Maxout { argmax, .. } => argmax.at(0, 0, pix / w, pix % w),
            _ => 0,
        };
        let coeffs = &weights[winner * channels..(winner + 1) * channels];
        let mut best = (0, f64::NEG_INFINITY);
        for (p, &(lo, hi)) in groups.iter().enumerate() {
            let score: f64 = (lo..hi)
                .map(|c| match mode {
                    Attribution::Activation => (coeffs[c] * f[c * plane + pix]).to_f64().abs(),
                    Attribution::Weight => coeffs[c].to_f64().abs(),
                })
                .sum();
            if score > best.1 {
                best = (p, score);
            }
        }
        *label = best.0 as u8;
    }
    ActivationMap::new(h, w, labels, legend)
}

/// Per-row label histogram in percent.
pub fn depth_contribution(map: &ActivationMap) -> DepthContribution {
    let paths = map.legend.len();
    let rows = (0..map.height)
        .map(|r| {
            let mut counts = vec![0usize; paths];
            for c in 0..map.width {
                counts[map.at(r, c)] += 1;
            }
            counts.iter().map(|&k| 100.0 * k as f64 / map.width as f64).collect()
        })
        .collect();
    DepthContribution {
        rows,
        legend: map.legend.clone(),
    }
}
