use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

use super::conv::{conv2d_backward_with, conv2d_forward, ConvLayer};

/// Parallel convolutions over one input whose outputs are stacked along the
/// channel axis in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct InceptionBlock<T> {
    pub paths: Vec<ConvLayer<T>>,
}

#[derive(Clone, Debug)]
pub struct InceptionGrads<T> {
    pub input: Option<Tensor<T>>,
    /// `(weights, biases)` per path.
    pub paths: Vec<(Tensor<T>, Tensor<T>)>,
}

impl<T: Element> InceptionBlock<T> {
    pub fn new(paths: Vec<ConvLayer<T>>) -> Result<Self> {
        let block = Self { paths };
        block.validate()?;
        Ok(block)
    }

    pub fn validate(&self) -> Result<()> {
        let first = self
            .paths
            .first()
            .ok_or_else(|| Error::config("inception block without paths"))?;
        for p in &self.paths {
            p.validate()?;
            if p.in_channels != first.in_channels {
                return Err(Error::config(format!(
                    "inception paths disagree on input channels ({} vs {})",
                    p.in_channels, first.in_channels
                )));
            }
        }
        Ok(())
    }

    pub fn in_channels(&self) -> usize {
        self.paths[0].in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.paths.iter().map(|p| p.num_kernels).sum()
    }

    /// First output channel of every path, plus the total as a final entry.
    pub fn channel_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.paths.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for p in &self.paths {
            acc += p.num_kernels;
            offsets.push(acc);
        }
        offsets
    }

    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        self.validate()?;
        let hw = self.paths[0].output_hw(h, w)?;
        for (i, p) in self.paths.iter().enumerate().skip(1) {
            let other = p.output_hw(h, w)?;
            if other != hw {
                return Err(Error::config(format!(
                    "inception path {i} produces {other:?}, path 0 produces {hw:?}"
                )));
            }
        }
        Ok(hw)
    }
}

pub fn inception_forward<T: Element>(input: &Tensor<T>, block: &InceptionBlock<T>) -> Result<Tensor<T>> {
    let [b, _, h, w] = input.dims4()?;
    let (ho, wo) = block.output_hw(h, w)?;
    let outs = block
        .paths
        .iter()
        .map(|p| conv2d_forward(input, p))
        .collect::<Result<Vec<_>>>()?;
    concat_channels(&outs, b, block.out_channels(), ho * wo, (ho, wo))
}

pub fn inception_backward<T: Element>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    block: &InceptionBlock<T>,
    input_grad: bool,
) -> Result<InceptionGrads<T>> {
    let [b, _, h, w] = input.dims4()?;
    let (ho, wo) = block.output_hw(h, w)?;
    let total = block.out_channels();
    if grad_out.dims() != [b, total, ho, wo] {
        return Err(Error::shape(format!(
            "inception grad dims {:?}, expected [{b}, {total}, {ho}, {wo}]",
            grad_out.dims()
        )));
    }
    let offsets = block.channel_offsets();
    let plane = ho * wo;
    let mut grad_in: Option<Tensor<T>> = None;
    let mut paths = Vec::with_capacity(block.paths.len());
    for (pi, path) in block.paths.iter().enumerate() {
        let k = path.num_kernels;
        let mut g = Tensor::zeros(&[b, k, ho, wo])?;
        for bi in 0..b {
            let src = &grad_out.data()[(bi * total + offsets[pi]) * plane..(bi * total + offsets[pi] + k) * plane];
            g.outer_mut(bi).copy_from_slice(src);
        }
        let grads = conv2d_backward_with(&g, input, path, input_grad)?;
        if let Some(gi) = grads.input {
            match grad_in.as_mut() {
                None => grad_in = Some(gi),
                Some(acc) => {
                    for (a, &v) in acc.data_mut().iter_mut().zip(gi.data()) {
                        *a += v;
                    }
                }
            }
        }
        paths.push((grads.weights, grads.biases));
    }
    Ok(InceptionGrads { input: grad_in, paths })
}

fn concat_channels<T: Element>(
    parts: &[Tensor<T>],
    b: usize,
    total: usize,
    plane: usize,
    (h, w): (usize, usize),
) -> Result<Tensor<T>> {
    let mut out = Tensor::zeros(&[b, total, h, w])?;
    for bi in 0..b {
        let dst = out.outer_mut(bi);
        let mut at = 0;
        for part in parts {
            let src = part.outer(bi);
            dst[at..at + src.len()].copy_from_slice(src);
            at += src.len();
        }
        debug_assert_eq!(at, total * plane);
    }
    Ok(out)
}
