//! Declarative layer lists for the IDNet family and the fixed-kernel baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Activation {
    Maxout { pieces: usize },
    Relu,
    /// Linear output; used for the last layer of ReLU variants so the
    /// reconstructed RF keeps its sign.
    Identity,
}

impl Activation {
    /// Channels left after the activation is applied to `channels` maps.
    pub fn output_channels(self, channels: usize) -> Result<usize> {
        match self {
            Activation::Maxout { pieces } => {
                if pieces == 0 || channels % pieces != 0 {
                    Err(Error::config(format!(
                        "maxout {pieces} cannot group {channels} channels"
                    )))
                } else {
                    Ok(channels / pieces)
                }
            }
            Activation::Relu | Activation::Identity => Ok(channels),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvSpec {
    /// height × width
    pub kernel: [usize; 2],
    /// height × width
    pub pad: [usize; 2],
    pub kernels: usize,
}

impl ConvSpec {
    /// Odd kernel with "same" padding.
    pub fn same(kernel_h: usize, kernel_w: usize, kernels: usize) -> Self {
        Self {
            kernel: [kernel_h, kernel_w],
            pad: [kernel_h / 2, kernel_w / 2],
            kernels,
        }
    }

    pub fn is_same(&self) -> bool {
        self.kernel[0] % 2 == 1
            && self.kernel[1] % 2 == 1
            && self.pad == [(self.kernel[0] - 1) / 2, (self.kernel[1] - 1) / 2]
    }

    pub fn weight_count(&self, in_channels: usize) -> usize {
        self.kernels * in_channels * self.kernel[0] * self.kernel[1]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv(ConvSpec),
    Inception(Vec<ConvSpec>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn paths(&self) -> &[ConvSpec] {
        match &self.kind {
            LayerKind::Conv(c) => std::slice::from_ref(c),
            LayerKind::Inception(p) => p,
        }
    }

    pub fn is_inception(&self) -> bool {
        matches!(self.kind, LayerKind::Inception(_))
    }

    /// Channels produced before the activation.
    pub fn raw_channels(&self) -> usize {
        self.paths().iter().map(|p| p.kernels).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub name: String,
    pub input_channels: usize,
    pub layers: Vec<LayerSpec>,
}

impl ModelConfig {
    /// Checks channel bookkeeping and padding, returning the post-activation
    /// channel count of every layer.
    pub fn validate(&self) -> Result<Vec<usize>> {
        if self.input_channels == 0 {
            return Err(Error::config("model needs at least one input channel"));
        }
        if self.layers.is_empty() {
            return Err(Error::config("model has no layers"));
        }
        let mut channels = Vec::with_capacity(self.layers.len());
        for (li, layer) in self.layers.iter().enumerate() {
            if layer.paths().is_empty() {
                return Err(Error::config(format!("layer {li} has no convolution paths")));
            }
            for p in layer.paths() {
                if p.kernels == 0 {
                    return Err(Error::config(format!("layer {li} has a path without kernels")));
                }
                if !p.is_same() {
                    return Err(Error::config(format!(
                        "layer {li}: {:?} kernel with pad {:?} is not odd with same padding",
                        p.kernel, p.pad
                    )));
                }
                // maxout groups must not straddle two inception paths
                if let Activation::Maxout { pieces } = layer.activation {
                    if pieces == 0 || p.kernels % pieces != 0 {
                        return Err(Error::config(format!(
                            "layer {li}: {} kernels per path not divisible by maxout {pieces}",
                            p.kernels
                        )));
                    }
                }
            }
            channels.push(layer.activation.output_channels(layer.raw_channels())?);
        }
        if *channels.last().expect("non-empty") != 1 {
            return Err(Error::config(format!(
                "model must end with one channel, ends with {}",
                channels.last().unwrap()
            )));
        }
        Ok(channels)
    }

    /// Input channel count seen by each layer.
    pub fn layer_inputs(&self) -> Result<Vec<usize>> {
        let post = self.validate()?;
        let mut inputs = vec![self.input_channels];
        inputs.extend_from_slice(&post[..post.len() - 1]);
        Ok(inputs)
    }

    /// `channel × height × width` after each layer for an `h × w` input.
    pub fn shape_trace(&self, h: usize, w: usize) -> Result<Vec<[usize; 3]>> {
        Ok(self.validate()?.into_iter().map(|c| [c, h, w]).collect())
    }

    pub fn param_count(&self) -> Result<usize> {
        let inputs = self.layer_inputs()?;
        Ok(self
            .layers
            .iter()
            .zip(inputs)
            .map(|(l, c)| l.paths().iter().map(|p| p.weight_count(c) + p.kernels).sum::<usize>())
            .sum())
    }

    /// Largest kernel half-extents `(rows, cols)` over all layers.
    pub fn max_half_kernel(&self) -> (usize, usize) {
        self.layers
            .iter()
            .flat_map(|l| l.paths())
            .fold((0, 0), |(h, w), p| (h.max(p.kernel[0] / 2), w.max(p.kernel[1] / 2)))
    }

    pub fn with_input_channels(mut self, m: usize) -> Self {
        self.input_channels = m;
        self
    }

    pub fn inception_layer(&self) -> Option<usize> {
        self.layers.iter().position(LayerSpec::is_inception)
    }
}

/// Named architectures.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinModel {
    Idnet4,
    Idnet2,
    Idnet8,
    IdnetRelu,
    FixedKernelBaseline,
}

impl BuiltinModel {
    pub const ALL: [BuiltinModel; 5] = [
        BuiltinModel::Idnet4,
        BuiltinModel::Idnet2,
        BuiltinModel::Idnet8,
        BuiltinModel::IdnetRelu,
        BuiltinModel::FixedKernelBaseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinModel::Idnet4 => "idnet4",
            BuiltinModel::Idnet2 => "idnet2",
            BuiltinModel::Idnet8 => "idnet8",
            BuiltinModel::IdnetRelu => "idnet_relu",
            BuiltinModel::FixedKernelBaseline => "fixed_kernel_baseline",
        }
    }
}

impl fmt::Display for BuiltinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinModel::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::config(format!("unknown model '{s}'")))
    }
}

const MAXOUT4: Activation = Activation::Maxout { pieces: 4 };

/// Kernel size used by scaled-down configs for each full-size kernel.
///
/// Desk-scale grids sample depth twice and angle four times more coarsely
/// than the full 512 × 256 grid, so heights shrink to `(h + 1) / 2` and
/// widths to 3 or 5. Unlisted sizes are kept.
pub const DESK_KERNELS: [([usize; 2], [usize; 2]); 11] = [
    ([9, 3], [9, 3]),
    ([17, 5], [9, 3]),
    ([33, 9], [17, 3]),
    ([37, 11], [19, 3]),
    ([41, 11], [21, 3]),
    ([45, 13], [23, 3]),
    ([49, 13], [25, 3]),
    ([53, 15], [27, 5]),
    ([57, 15], [29, 5]),
    ([61, 17], [31, 5]),
    ([65, 17], [33, 5]),
];

fn desk_kernel(kernel: [usize; 2]) -> [usize; 2] {
    DESK_KERNELS
        .iter()
        .find(|(full, _)| *full == kernel)
        .map(|(_, desk)| *desk)
        .unwrap_or(kernel)
}

/// Full-size inception rows.
fn inception_rows(model: BuiltinModel) -> Vec<([usize; 2], usize)> {
    match model {
        BuiltinModel::Idnet2 => vec![([49, 13], 16), ([65, 17], 16)],
        BuiltinModel::Idnet8 => [
            [37, 11],
            [41, 11],
            [45, 13],
            [49, 13],
            [53, 15],
            [57, 15],
            [61, 17],
            [65, 17],
        ]
        .into_iter()
        .map(|k| (k, 4))
        .collect(),
        _ => vec![([41, 11], 8), ([49, 13], 8), ([57, 15], 8), ([65, 17], 8)],
    }
}

/// Builds a named architecture with three input transmits.
///
/// `scale == 1` is the full-size network. A larger `scale` divides kernel
/// counts by `scale` (never below one maxout group per path) and switches to
/// the [`DESK_KERNELS`] sizes.
pub fn builtin_config(model: BuiltinModel, scale: usize) -> Result<ModelConfig> {
    if scale == 0 || !scale.is_power_of_two() {
        return Err(Error::config(format!("scale must be a power of two, got {scale}")));
    }
    let relu = model == BuiltinModel::IdnetRelu;
    let (hidden_act, out_act) = if relu {
        (Activation::Relu, Activation::Identity)
    } else {
        (MAXOUT4, MAXOUT4)
    };
    // ReLU variants keep the post-activation counts of the maxout network
    let divisor = if relu { 4 } else { 1 };
    let min_kernels = if relu { 1 } else { 4 };
    let count = |full: usize| -> usize {
        let k = (full / divisor / scale).max(min_kernels);
        k / min_kernels * min_kernels
    };
    let size = |k: [usize; 2]| if scale > 1 { desk_kernel(k) } else { k };
    let conv = |k: [usize; 2], n: usize, act: Activation| {
        let k = size(k);
        LayerSpec {
            kind: LayerKind::Conv(ConvSpec::same(k[0], k[1], count(n))),
            activation: act,
        }
    };

    let mut layers = vec![
        conv([9, 3], 256, hidden_act),
        conv([17, 5], 128, hidden_act),
        conv([33, 9], 64, hidden_act),
    ];
    if model == BuiltinModel::FixedKernelBaseline {
        layers.push(conv([65, 17], 32, hidden_act));
    } else {
        let paths = inception_rows(model)
            .into_iter()
            .map(|(k, n)| {
                let k = size(k);
                ConvSpec::same(k[0], k[1], count(n))
            })
            .collect();
        layers.push(LayerSpec {
            kind: LayerKind::Inception(paths),
            activation: hidden_act,
        });
    }
    let last_kernels = if relu { 1 } else { 4 };
    layers.push(LayerSpec {
        kind: LayerKind::Conv(ConvSpec::same(1, 1, last_kernels)),
        activation: out_act,
    });

    let name = if scale == 1 {
        model.name().to_string()
    } else {
        format!("{}_s{scale}", model.name())
    };
    let cfg = ModelConfig {
        name,
        input_channels: 3,
        layers,
    };
    cfg.validate()?;
    Ok(cfg)
}
