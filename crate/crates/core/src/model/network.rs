use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nncore::{
    conv2d_backward_with, conv2d_forward, inception_backward, inception_forward, maxout_backward,
    maxout_forward, relu_backward, relu_forward, ArgmaxMap, ConvLayer, InceptionBlock,
};
use crate::tensor::{Element, Tensor};

use super::config::{Activation, LayerKind, ModelConfig};

/// Trainable parameters of one layer.
#[derive(Clone, Debug, PartialEq)]
pub enum LayerParams<T> {
    Conv(ConvLayer<T>),
    Inception(InceptionBlock<T>),
}

impl<T: Element> LayerParams<T> {
    pub fn paths(&self) -> &[ConvLayer<T>] {
        match self {
            LayerParams::Conv(c) => std::slice::from_ref(c),
            LayerParams::Inception(b) => &b.paths,
        }
    }

    fn paths_mut(&mut self) -> &mut [ConvLayer<T>] {
        match self {
            LayerParams::Conv(c) => std::slice::from_mut(c),
            LayerParams::Inception(b) => &mut b.paths,
        }
    }

    fn forward(&self, input: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            LayerParams::Conv(c) => conv2d_forward(input, c),
            LayerParams::Inception(b) => inception_forward(input, b),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub learning_rate: f64,
    pub best_val_loss: Option<f64>,
    pub seed: u64,
    /// Factor applied to raw RF before it enters the network; outputs are
    /// divided by it again.
    #[serde(default = "unit_scale")]
    pub input_scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl Default for CheckpointMeta {
    fn default() -> Self {
        Self {
            epoch: 0,
            learning_rate: 0.0,
            best_val_loss: None,
            seed: 0,
            input_scale: 1.0,
        }
    }
}

/// A model configuration together with its weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint<T> {
    pub config: ModelConfig,
    pub layers: Vec<LayerParams<T>>,
    pub meta: CheckpointMeta,
}

/// Zero-initialized parameters shaped after `config`.
pub fn zeros<T: Element>(config: &ModelConfig) -> Result<Checkpoint<T>> {
    let inputs = config.layer_inputs()?;
    let layers = config
        .layers
        .iter()
        .zip(inputs)
        .map(|(spec, c)| {
            let paths = spec
                .paths()
                .iter()
                .map(|p| {
                    ConvLayer::zeros(
                        c,
                        p.kernels,
                        (p.kernel[0], p.kernel[1]),
                        (p.pad[0], p.pad[1]),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(match spec.kind {
                LayerKind::Conv(_) => LayerParams::Conv(paths.into_iter().next().expect("one path")),
                LayerKind::Inception(_) => LayerParams::Inception(InceptionBlock::new(paths)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Checkpoint {
        config: config.clone(),
        layers,
        meta: CheckpointMeta::default(),
    })
}

/// Uniform Xavier weights, zero biases, reproducible from `seed`.
pub fn build<T: Element>(config: &ModelConfig, seed: u64) -> Result<Checkpoint<T>> {
    let mut ckpt = zeros::<T>(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for layer in &mut ckpt.layers {
        for conv in layer.paths_mut() {
            let taps = conv.kernel_h * conv.kernel_w;
            let fan_in = conv.in_channels * taps;
            let fan_out = conv.num_kernels * taps;
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in conv.weights.data_mut() {
                *w = T::from_f64(rng.random_range(-bound..bound));
            }
        }
    }
    ckpt.meta.seed = seed;
    Ok(ckpt)
}

impl<T: Element> Checkpoint<T> {
    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.paths())
            .map(ConvLayer::param_count)
            .sum()
    }

    /// Parameter tensors in a fixed order: layer, path, then weights before biases.
    pub fn params(&self) -> Vec<&Tensor<T>> {
        self.layers
            .iter()
            .flat_map(|l| l.paths())
            .flat_map(|c| [&c.weights, &c.biases])
            .collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<T>> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.paths_mut())
            .flat_map(|c| [&mut c.weights, &mut c.biases])
            .collect()
    }

    /// Checks parameter shapes against the embedded config.
    pub fn validate(&self) -> Result<()> {
        let expected = zeros::<T>(&self.config)?;
        if expected.layers.len() != self.layers.len() {
            return Err(Error::shape(format!(
                "checkpoint has {} layers, config declares {}",
                self.layers.len(),
                expected.layers.len()
            )));
        }
        for (li, (a, b)) in self.layers.iter().zip(&expected.layers).enumerate() {
            if a.paths().len() != b.paths().len()
                || std::mem::discriminant(a) != std::mem::discriminant(b)
            {
                return Err(Error::shape(format!("layer {li} structure differs from config")));
            }
            for (pa, pb) in a.paths().iter().zip(b.paths()) {
                if pa.weights.dims() != pb.weights.dims()
                    || pa.biases.dims() != pb.biases.dims()
                    || (pa.pad_h, pa.pad_w) != (pb.pad_h, pb.pad_w)
                {
                    return Err(Error::shape(format!(
                        "layer {li}: weights {:?} do not match config {:?}",
                        pa.weights.dims(),
                        pb.weights.dims()
                    )));
                }
            }
        }
        if !self.params().iter().all(|p| p.is_finite()) {
            return Err(Error::NonFinite("checkpoint parameters".into()));
        }
        Ok(())
    }

    /// Widens or narrows every parameter to another element type.
    pub fn cast<U: Element>(&self) -> Checkpoint<U> {
        let cast_conv = |c: &ConvLayer<T>| ConvLayer {
            in_channels: c.in_channels,
            num_kernels: c.num_kernels,
            kernel_h: c.kernel_h,
            kernel_w: c.kernel_w,
            pad_h: c.pad_h,
            pad_w: c.pad_w,
            weights: c.weights.cast(),
            biases: c.biases.cast(),
        };
        Checkpoint {
            config: self.config.clone(),
            layers: self
                .layers
                .iter()
                .map(|l| match l {
                    LayerParams::Conv(c) => LayerParams::Conv(cast_conv(c)),
                    LayerParams::Inception(b) => LayerParams::Inception(InceptionBlock {
                        paths: b.paths.iter().map(cast_conv).collect(),
                    }),
                })
                .collect(),
            meta: self.meta.clone(),
        }
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<()> {
        let [_, c, h, w] = input.dims4()?;
        if c != self.config.input_channels {
            return Err(Error::shape(format!(
                "model expects {} input channels, got {c}",
                self.config.input_channels
            )));
        }
        let (hh, hw) = self.config.max_half_kernel();
        if h < hh || w < hw {
            return Err(Error::shape(format!(
                "input {h}×{w} smaller than the largest kernel half-extent {hh}×{hw}"
            )));
        }
        Ok(())
    }
}

/// What an activation needs to remember for the backward pass.
#[derive(Clone, Debug)]
pub enum ActivationCache<T> {
    Maxout { pieces: usize, argmax: ArgmaxMap },
    Relu { pre_activation: Tensor<T> },
    Identity,
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace<T> {
    /// Input to every layer; `inputs[0]` is the network input.
    pub inputs: Vec<Tensor<T>>,
    pub activations: Vec<ActivationCache<T>>,
    pub output: Tensor<T>,
}

fn activate<T: Element>(pre: Tensor<T>, act: Activation, keep: bool) -> Result<(Tensor<T>, ActivationCache<T>)> {
    Ok(match act {
        Activation::Maxout { pieces } => {
            let (out, argmax) = maxout_forward(&pre, pieces)?;
            (out, ActivationCache::Maxout { pieces, argmax })
        }
        Activation::Relu => {
            let out = relu_forward(&pre);
            let cache = if keep {
                ActivationCache::Relu { pre_activation: pre }
            } else {
                ActivationCache::Identity
            };
            (out, cache)
        }
        Activation::Identity => (pre, ActivationCache::Identity),
    })
}

/// Runs the network on a `B × m × H × W` batch, returning `B × 1 × H × W`.
pub fn forward<T: Element>(ckpt: &Checkpoint<T>, input: &Tensor<T>) -> Result<Tensor<T>> {
    ckpt.check_input(input)?;
    let mut x = input.clone();
    for (spec, layer) in ckpt.config.layers.iter().zip(&ckpt.layers) {
        let pre = layer.forward(&x)?;
        x = activate(pre, spec.activation, false)?.0;
    }
    Ok(x)
}

/// Forward pass that keeps what [`backward`] needs.
pub fn forward_trace<T: Element>(ckpt: &Checkpoint<T>, input: &Tensor<T>) -> Result<ForwardTrace<T>> {
    ckpt.check_input(input)?;
    let mut inputs = Vec::with_capacity(ckpt.layers.len());
    let mut activations = Vec::with_capacity(ckpt.layers.len());
    let mut x = input.clone();
    for (spec, layer) in ckpt.config.layers.iter().zip(&ckpt.layers) {
        let pre = layer.forward(&x)?;
        inputs.push(x);
        let (out, cache) = activate(pre, spec.activation, true)?;
        activations.push(cache);
        x = out;
    }
    Ok(ForwardTrace {
        inputs,
        activations,
        output: x,
    })
}

/// Gradients for every parameter, ordered like [`Checkpoint::params`].
pub fn backward<T: Element>(
    ckpt: &Checkpoint<T>,
    trace: &ForwardTrace<T>,
    grad_output: &Tensor<T>,
) -> Result<Vec<Tensor<T>>> {
    grad_output.ensure_same_dims(&trace.output, "network output gradient")?;
    let mut per_layer: Vec<Vec<Tensor<T>>> = vec![Vec::new(); ckpt.layers.len()];
    let mut grad = grad_output.clone();
    for li in (0..ckpt.layers.len()).rev() {
        let pre_grad = match &trace.activations[li] {
            ActivationCache::Maxout { pieces, argmax } => maxout_backward(&grad, argmax, *pieces)?,
            ActivationCache::Relu { pre_activation } => relu_backward(&grad, pre_activation)?,
            ActivationCache::Identity => grad,
        };
        let need_input = li > 0;
        let input = &trace.inputs[li];
        let (gin, params) = match &ckpt.layers[li] {
            LayerParams::Conv(c) => {
                let g = conv2d_backward_with(&pre_grad, input, c, need_input)?;
                (g.input, vec![g.weights, g.biases])
            }
            LayerParams::Inception(b) => {
                let g = inception_backward(&pre_grad, input, b, need_input)?;
                (g.input, g.paths.into_iter().flat_map(|(w, b)| [w, b]).collect())
            }
        };
        per_layer[li] = params;
        match gin {
            Some(g) => grad = g,
            None => break,
        }
    }
    Ok(per_layer.into_iter().flatten().collect())
}
