use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::{self, PlaneGeom};
use crate::tensor::{Element, Tensor};

/// Stride-1 2-D convolution (cross-correlation) with zero padding.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T> {
    pub in_channels: usize,
    pub num_kernels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub pad_h: usize,
    pub pad_w: usize,
    /// `num_kernels × in_channels × kernel_h × kernel_w`
    pub weights: Tensor<T>,
    /// `num_kernels`
    pub biases: Tensor<T>,
}

/// Gradients of a loss with respect to the inputs and parameters of a [`ConvLayer`].
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    /// `None` when the caller asked not to propagate into the input.
    pub input: Option<Tensor<T>>,
    pub weights: Tensor<T>,
    pub biases: Tensor<T>,
}

impl<T: Element> ConvLayer<T> {
    pub fn zeros(
        in_channels: usize,
        num_kernels: usize,
        kernel: (usize, usize),
        pad: (usize, usize),
    ) -> Result<Self> {
        let (kernel_h, kernel_w) = kernel;
        Ok(Self {
            in_channels,
            num_kernels,
            kernel_h,
            kernel_w,
            pad_h: pad.0,
            pad_w: pad.1,
            weights: Tensor::zeros(&[num_kernels, in_channels, kernel_h, kernel_w])?,
            biases: Tensor::zeros(&[num_kernels])?,
        })
    }

    /// Builds a layer around existing parameters; geometry is read from `weights`.
    pub fn from_params(weights: Tensor<T>, biases: Tensor<T>, pad: (usize, usize)) -> Result<Self> {
        let [k, c, kh, kw] = weights.dims4()?;
        let layer = Self {
            in_channels: c,
            num_kernels: k,
            kernel_h: kh,
            kernel_w: kw,
            pad_h: pad.0,
            pad_w: pad.1,
            weights,
            biases,
        };
        layer.validate()?;
        Ok(layer)
    }

    pub fn validate(&self) -> Result<()> {
        let expect = [self.num_kernels, self.in_channels, self.kernel_h, self.kernel_w];
        if self.weights.dims() != expect {
            return Err(Error::config(format!(
                "conv weights have dims {:?}, layer declares {expect:?}",
                self.weights.dims()
            )));
        }
        if self.biases.dims() != [self.num_kernels] {
            return Err(Error::config(format!(
                "conv biases have dims {:?}, expected [{}]",
                self.biases.dims(),
                self.num_kernels
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    /// Output spatial extents for an `h × w` input.
    pub fn output_hw(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        let (ph, pw) = (h + 2 * self.pad_h, w + 2 * self.pad_w);
        if ph < self.kernel_h || pw < self.kernel_w {
            return Err(Error::config(format!(
                "{}×{} kernel exceeds padded input {ph}×{pw}",
                self.kernel_h, self.kernel_w
            )));
        }
        Ok((ph - self.kernel_h + 1, pw - self.kernel_w + 1))
    }

    fn check_input(&self, input: &Tensor<T>) -> Result<[usize; 4]> {
        self.validate()?;
        let dims = input.dims4()?;
        if dims[1] != self.in_channels {
            return Err(Error::config(format!(
                "conv expects {} input channels, got {}",
                self.in_channels, dims[1]
            )));
        }
        self.output_hw(dims[2], dims[3])?;
        Ok(dims)
    }
}

/// Copies an `h × w` plane into a zeroed `dst_h × dst_w` plane at a signed
/// offset, dropping whatever falls outside.
fn embed<T: Element>(
    src: &[T],
    (h, w): (usize, usize),
    dst: &mut [T],
    (dst_h, dst_w): (usize, usize),
    (off_r, off_c): (isize, isize),
) {
    for r in 0..h {
        let dr = r as isize + off_r;
        if dr < 0 || dr >= dst_h as isize {
            continue;
        }
        let c_lo = (-off_c).max(0) as usize;
        let c_hi = ((dst_w as isize - off_c).min(w as isize)).max(0) as usize;
        if c_lo >= c_hi {
            continue;
        }
        let d0 = dr as usize * dst_w + (c_lo as isize + off_c) as usize;
        dst[d0..d0 + (c_hi - c_lo)].copy_from_slice(&src[r * w + c_lo..r * w + c_hi]);
    }
}

/// Zero-pads every plane of a `B × C × H × W` tensor into a flat buffer.
fn pad_planes<T: Element>(
    data: &[T],
    planes: usize,
    (h, w): (usize, usize),
    (dst_h, dst_w): (usize, usize),
    offset: (isize, isize),
) -> Vec<T> {
    let mut out = vec![T::zero(); planes * dst_h * dst_w];
    out.par_chunks_mut(dst_h * dst_w)
        .zip(data.par_chunks(h * w))
        .for_each(|(dst, src)| embed(src, (h, w), dst, (dst_h, dst_w), offset));
    out
}

pub fn conv2d_forward<T: Element>(input: &Tensor<T>, layer: &ConvLayer<T>) -> Result<Tensor<T>> {
    let [b, c, h, w] = layer.check_input(input)?;
    let (hp, wp) = (h + 2 * layer.pad_h, w + 2 * layer.pad_w);
    let geom = PlaneGeom {
        channels: c,
        height: hp,
        width: wp,
        kernel_h: layer.kernel_h,
        kernel_w: layer.kernel_w,
    };
    let padded = pad_planes(
        input.data(),
        b * c,
        (h, w),
        (hp, wp),
        (layer.pad_h as isize, layer.pad_w as isize),
    );
    let k = layer.num_kernels;
    let (ho, wo) = (geom.out_h(), geom.out_w());
    let taps = c * layer.kernel_h * layer.kernel_w;
    let mut out = Tensor::zeros(&[b, k, ho, wo])?;
    let plane = ho * wo;
    let sample = c * hp * wp;
    out.data_mut()
        .par_chunks_mut(k * plane)
        .enumerate()
        .for_each(|(bi, planes)| {
            let src = &padded[bi * sample..(bi + 1) * sample];
            planes
                .par_chunks_mut(kernels::BLOCK * plane)
                .enumerate()
                .for_each(|(blk, o)| {
                    let k0 = blk * kernels::BLOCK;
                    let n = o.len() / plane;
                    kernels::correlate_planes(
                        src,
                        geom,
                        &layer.weights.data()[k0 * taps..(k0 + n) * taps],
                        &layer.biases.data()[k0..k0 + n],
                        o,
                    );
                });
        });
    Ok(out)
}

pub fn conv2d_backward<T: Element>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
) -> Result<ConvGrads<T>> {
    conv2d_backward_with(grad_out, input, layer, true)
}

/// Like [`conv2d_backward`], optionally skipping the input gradient (first
/// layer of a network).
pub fn conv2d_backward_with<T: Element>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    input_grad: bool,
) -> Result<ConvGrads<T>> {
    let [b, c, h, w] = layer.check_input(input)?;
    let k = layer.num_kernels;
    let (ho, wo) = layer.output_hw(h, w)?;
    if grad_out.dims() != [b, k, ho, wo] {
        return Err(Error::shape(format!(
            "grad_out dims {:?} do not match conv output [{b}, {k}, {ho}, {wo}]",
            grad_out.dims()
        )));
    }
    let (kh, kw) = (layer.kernel_h, layer.kernel_w);
    let (hp, wp) = (h + 2 * layer.pad_h, w + 2 * layer.pad_w);
    let taps = c * kh * kw;

    let mut grad_b = Tensor::zeros(&[k])?;
    for (ki, gb) in grad_b.data_mut().iter_mut().enumerate() {
        for bi in 0..b {
            let plane = &grad_out.data()[(bi * k + ki) * ho * wo..(bi * k + ki + 1) * ho * wo];
            *gb += plane.iter().copied().sum::<T>();
        }
    }

    let padded = pad_planes(
        input.data(),
        b * c,
        (h, w),
        (hp, wp),
        (layer.pad_h as isize, layer.pad_w as isize),
    );
    let geom = PlaneGeom {
        channels: c,
        height: hp,
        width: wp,
        kernel_h: kh,
        kernel_w: kw,
    };
    let mut grad_w = Tensor::zeros(layer.weights.dims())?;
    grad_w
        .data_mut()
        .par_chunks_mut(kernels::BLOCK * taps)
        .enumerate()
        .for_each(|(blk, gw)| {
            let k0 = blk * kernels::BLOCK;
            let n = gw.len() / taps;
            for bi in 0..b {
                kernels::accumulate_weight_grads(
                    &grad_out.data()[(bi * k + k0) * ho * wo..(bi * k + k0 + n) * ho * wo],
                    &padded[bi * c * hp * wp..(bi + 1) * c * hp * wp],
                    geom,
                    gw,
                );
            }
        });

    let grad_in = if input_grad {
        Some(input_gradient(grad_out, layer, [b, c, h, w], (ho, wo))?)
    } else {
        None
    };

    Ok(ConvGrads {
        input: grad_in,
        weights: grad_w,
        biases: grad_b,
    })
}

/// Full correlation of `grad_out` with the flipped, channel-transposed kernel.
fn input_gradient<T: Element>(
    grad_out: &Tensor<T>,
    layer: &ConvLayer<T>,
    [b, c, h, w]: [usize; 4],
    (ho, wo): (usize, usize),
) -> Result<Tensor<T>> {
    let k = layer.num_kernels;
    let (kh, kw) = (layer.kernel_h, layer.kernel_w);

    // flipped[c, k, u, v] = weights[k, c, kh-1-u, kw-1-v]
    let wd = layer.weights.data();
    let mut flipped = vec![T::zero(); wd.len()];
    for ki in 0..k {
        for ci in 0..c {
            for u in 0..kh {
                for v in 0..kw {
                    flipped[((ci * k + ki) * kh + u) * kw + v] =
                        wd[((ki * c + ci) * kh + (kh - 1 - u)) * kw + (kw - 1 - v)];
                }
            }
        }
    }

    let (gh, gw) = (h + kh - 1, w + kw - 1);
    let off = (
        kh as isize - 1 - layer.pad_h as isize,
        kw as isize - 1 - layer.pad_w as isize,
    );
    let gpad = pad_planes(grad_out.data(), b * k, (ho, wo), (gh, gw), off);
    let geom = PlaneGeom {
        channels: k,
        height: gh,
        width: gw,
        kernel_h: kh,
        kernel_w: kw,
    };
    let taps = k * kh * kw;
    let mut grad_in = Tensor::zeros(&[b, c, h, w])?;
    let zeros = vec![T::zero(); c];
    let sample = k * gh * gw;
    grad_in
        .data_mut()
        .par_chunks_mut(c * h * w)
        .enumerate()
        .for_each(|(bi, planes)| {
            let src = &gpad[bi * sample..(bi + 1) * sample];
            planes
                .par_chunks_mut(kernels::BLOCK * h * w)
                .enumerate()
                .for_each(|(blk, o)| {
                    let c0 = blk * kernels::BLOCK;
                    let n = o.len() / (h * w);
                    kernels::correlate_planes(src, geom, &flipped[c0 * taps..(c0 + n) * taps], &zeros[..n], o);
                });
        });
    Ok(grad_in)
}
