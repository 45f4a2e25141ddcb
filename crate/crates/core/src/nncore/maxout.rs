use crate::error::{Error, Result};
use crate::tensor::{Element, Tensor};

/// Maxout activation over contiguous blocks of `pieces` channels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxoutUnit {
    pub pieces: usize,
}

/// Winning channel offset (within its group) for every maxout output element.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArgmaxMap {
    dims: [usize; 4],
    offsets: Vec<u16>,
}

impl ArgmaxMap {
    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn offsets(&self) -> &[u16] {
        &self.offsets
    }

    /// Offset for batch `b`, group `g`, pixel `(i, j)`.
    pub fn at(&self, b: usize, g: usize, i: usize, j: usize) -> usize {
        let [_, gs, h, w] = self.dims;
        self.offsets[((b * gs + g) * h + i) * w + j] as usize
    }
}

fn check_pieces(channels: usize, k: usize) -> Result<usize> {
    if k == 0 || k > u16::MAX as usize {
        return Err(Error::config(format!("maxout pieces must be in 1..=65535, got {k}")));
    }
    if channels % k != 0 {
        return Err(Error::config(format!(
            "maxout with {k} pieces needs channels divisible by {k}, got {channels}"
        )));
    }
    Ok(channels / k)
}

/// Pixel-wise maximum over each group of `k` consecutive channels. Ties go
/// to the lowest channel.
pub fn maxout_forward<T: Element>(input: &Tensor<T>, k: usize) -> Result<(Tensor<T>, ArgmaxMap)> {
    let [b, c, h, w] = input.dims4()?;
    let groups = check_pieces(c, k)?;
    let hw = h * w;
    let mut out = Tensor::zeros(&[b, groups, h, w])?;
    let mut offsets = vec![0u16; b * groups * hw];
    let src = input.data();
    let dst = out.data_mut();
    for bi in 0..b {
        for g in 0..groups {
            let base_out = (bi * groups + g) * hw;
            let first = (bi * c + g * k) * hw;
            dst[base_out..base_out + hw].copy_from_slice(&src[first..first + hw]);
            for piece in 1..k {
                let plane = &src[first + piece * hw..first + (piece + 1) * hw];
                let best = &mut dst[base_out..base_out + hw];
                let arg = &mut offsets[base_out..base_out + hw];
                for ((m, a), &v) in best.iter_mut().zip(arg.iter_mut()).zip(plane) {
                    if v > *m {
                        *m = v;
                        *a = piece as u16;
                    }
                }
            }
        }
    }
    Ok((
        out,
        ArgmaxMap {
            dims: [b, groups, h, w],
            offsets,
        },
    ))
}

/// Routes each upstream gradient to the winning channel of its group.
pub fn maxout_backward<T: Element>(grad_out: &Tensor<T>, argmax: &ArgmaxMap, k: usize) -> Result<Tensor<T>> {
    let dims = grad_out.dims4()?;
    if dims != argmax.dims {
        return Err(Error::shape(format!(
            "maxout grad dims {dims:?} vs argmax dims {:?}",
            argmax.dims
        )));
    }
    if k == 0 {
        return Err(Error::config("maxout pieces must be positive"));
    }
    let [b, groups, h, w] = dims;
    let hw = h * w;
    let c = groups * k;
    let mut grad_in = Tensor::zeros(&[b, c, h, w])?;
    let gi = grad_in.data_mut();
    for bi in 0..b {
        for g in 0..groups {
            let base = (bi * groups + g) * hw;
            let first = (bi * c + g * k) * hw;
            for p in 0..hw {
                let off = argmax.offsets[base + p] as usize;
                if off >= k {
                    return Err(Error::shape(format!("argmax offset {off} out of range for k = {k}")));
                }
                gi[first + off * hw + p] = grad_out.data()[base + p];
            }
        }
    }
    Ok(grad_in)
}

pub fn relu_forward<T: Element>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Gradient of ReLU given the pre-activation input; the kink at zero takes
/// the zero branch.
pub fn relu_backward<T: Element>(grad_out: &Tensor<T>, pre_activation: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.ensure_same_dims(pre_activation, "relu backward")?;
    let data = grad_out
        .data()
        .iter()
        .zip(pre_activation.data())
        .map(|(&g, &x)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::from_vec(grad_out.dims(), data)
}
