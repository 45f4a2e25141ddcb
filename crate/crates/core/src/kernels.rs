//! Inner loops of the convolution layers.
//!
//! Kernels work on a single zero-padded sample and a block of output
//! channels, so callers can parallelize over (sample, block) pairs. Each
//! input vector loaded from memory feeds every channel of the block. Output
//! rows are processed in fixed-width lane blocks that the compiler keeps in
//! vector registers; on x86-64 an AVX2 build of the same code is selected at
//! runtime. No fused multiply-add is used, so both paths round identically.

use crate::tensor::Element;

const LANES: usize = 16;

/// Output channels computed together.
pub(crate) const BLOCK: usize = 4;

/// Geometry of one padded input sample and the kernel sliding over it.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PlaneGeom {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
}

impl PlaneGeom {
    pub fn out_h(&self) -> usize {
        self.height - self.kernel_h + 1
    }

    pub fn out_w(&self) -> usize {
        self.width - self.kernel_w + 1
    }

    fn taps(&self) -> usize {
        self.channels * self.kernel_h * self.kernel_w
    }
}

/// For every kernel `n` of the block:
/// `out[n][i, j] = biases[n] + sum_{c,u,v} weights[n][c, u, v] * src[c, i + u, j + v]`.
///
/// `weights` holds `biases.len()` kernels back to back and `out` as many planes.
pub(crate) fn correlate_planes<T: Element>(src: &[T], geom: PlaneGeom, weights: &[T], biases: &[T], out: &mut [T]) {
    let n = biases.len();
    let (taps, plane) = (geom.taps(), geom.out_h() * geom.out_w());
    debug_assert_eq!(src.len(), geom.channels * geom.height * geom.width);
    debug_assert_eq!(weights.len(), n * taps);
    debug_assert_eq!(out.len(), n * plane);
    let mut k = 0;
    while k < n {
        let step = if n - k >= BLOCK { BLOCK } else { 1 };
        let (w, b) = (&weights[k * taps..(k + step) * taps], &biases[k..k + step]);
        let o = &mut out[k * plane..(k + step) * plane];
        if step == BLOCK {
            correlate_dispatch::<T, BLOCK>(src, geom, w, b, o);
        } else {
            correlate_dispatch::<T, 1>(src, geom, w, b, o);
        }
        k += step;
    }
}

/// For every kernel `n`: `grad_w[n][c, u, v] += sum_{i,j} grad_out[n][i, j] * src[c, i + u, j + v]`.
///
/// `grad_out` holds one output-gradient plane per kernel of `grad_w`.
pub(crate) fn accumulate_weight_grads<T: Element>(grad_out: &[T], src: &[T], geom: PlaneGeom, grad_w: &mut [T]) {
    let (taps, plane) = (geom.taps(), geom.out_h() * geom.out_w());
    let n = grad_w.len() / taps;
    debug_assert_eq!(grad_w.len(), n * taps);
    debug_assert_eq!(grad_out.len(), n * plane);
    let mut k = 0;
    while k < n {
        let step = if n - k >= BLOCK { BLOCK } else { 1 };
        let g = &grad_out[k * plane..(k + step) * plane];
        let gw = &mut grad_w[k * taps..(k + step) * taps];
        if step == BLOCK {
            weight_grad_dispatch::<T, BLOCK>(g, src, geom, gw);
        } else {
            weight_grad_dispatch::<T, 1>(g, src, geom, gw);
        }
        k += step;
    }
}

#[inline(always)]
fn correlate_dispatch<T: Element, const N: usize>(src: &[T], geom: PlaneGeom, weights: &[T], biases: &[T], out: &mut [T]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            unsafe { correlate_avx2::<T, N>(src, geom, weights, biases, out) };
            return;
        }
    }
    correlate_impl::<T, N>(src, geom, weights, biases, out)
}

#[inline(always)]
fn weight_grad_dispatch<T: Element, const N: usize>(grad_out: &[T], src: &[T], geom: PlaneGeom, grad_w: &mut [T]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::is_x86_feature_detected!("avx2") {
            // SAFETY: the CPU supports AVX2, checked above.
            unsafe { weight_grad_avx2::<T, N>(grad_out, src, geom, grad_w) };
            return;
        }
    }
    weight_grad_impl::<T, N>(grad_out, src, geom, grad_w)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn correlate_avx2<T: Element, const N: usize>(
    src: &[T],
    geom: PlaneGeom,
    weights: &[T],
    biases: &[T],
    out: &mut [T],
) {
    correlate_impl::<T, N>(src, geom, weights, biases, out)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn weight_grad_avx2<T: Element, const N: usize>(grad_out: &[T], src: &[T], geom: PlaneGeom, grad_w: &mut [T]) {
    weight_grad_impl::<T, N>(grad_out, src, geom, grad_w)
}

#[inline(always)]
fn correlate_impl<T: Element, const N: usize>(
    src: &[T],
    geom: PlaneGeom,
    weights: &[T],
    biases: &[T],
    out: &mut [T],
) {
    let PlaneGeom {
        channels,
        height,
        width,
        kernel_h,
        kernel_w,
    } = geom;
    let (out_h, out_w) = (geom.out_h(), geom.out_w());
    let plane = height * width;
    let taps = geom.taps();
    let out_plane = out_h * out_w;
    let w: [&[T]; N] = std::array::from_fn(|n| &weights[n * taps..(n + 1) * taps]);
    let full = out_w / LANES * LANES;

    for i in 0..out_h {
        for j0 in (0..full).step_by(LANES) {
            let mut acc = [[T::zero(); LANES]; N];
            let mut tap = 0;
            for c in 0..channels {
                for u in 0..kernel_h {
                    let row = &src[c * plane + (i + u) * width + j0..c * plane + (i + u + 1) * width];
                    for v in 0..kernel_w {
                        let s: &[T; LANES] = row[v..v + LANES].try_into().unwrap();
                        for n in 0..N {
                            let wv = w[n][tap];
                            for t in 0..LANES {
                                acc[n][t] += wv * s[t];
                            }
                        }
                        tap += 1;
                    }
                }
            }
            for n in 0..N {
                let o = &mut out[n * out_plane + i * out_w + j0..n * out_plane + i * out_w + j0 + LANES];
                for t in 0..LANES {
                    o[t] = acc[n][t] + biases[n];
                }
            }
        }
        if full < out_w {
            let len = out_w - full;
            let mut acc = [[T::zero(); LANES]; N];
            let mut tap = 0;
            for c in 0..channels {
                for u in 0..kernel_h {
                    let row = &src[c * plane + (i + u) * width..c * plane + (i + u + 1) * width];
                    for v in 0..kernel_w {
                        let s = &row[full + v..full + v + len];
                        for n in 0..N {
                            let wv = w[n][tap];
                            for (x, &y) in acc[n][..len].iter_mut().zip(s) {
                                *x += wv * y;
                            }
                        }
                        tap += 1;
                    }
                }
            }
            for n in 0..N {
                let o = &mut out[n * out_plane + i * out_w + full..n * out_plane + (i + 1) * out_w];
                for (o, &a) in o.iter_mut().zip(&acc[n][..len]) {
                    *o = a + biases[n];
                }
            }
        }
    }
}

#[inline(always)]
fn weight_grad_impl<T: Element, const N: usize>(grad_out: &[T], src: &[T], geom: PlaneGeom, grad_w: &mut [T]) {
    let PlaneGeom {
        channels,
        height,
        width,
        kernel_h,
        kernel_w,
    } = geom;
    let (out_h, out_w) = (geom.out_h(), geom.out_w());
    let plane = height * width;
    let taps = geom.taps();
    let out_plane = out_h * out_w;
    let full = out_w / LANES * LANES;

    for c in 0..channels {
        for u in 0..kernel_h {
            for v in 0..kernel_w {
                let mut acc = [[T::zero(); LANES]; N];
                let mut tail = [T::zero(); N];
                for i in 0..out_h {
                    let start = c * plane + (i + u) * width + v;
                    let p = &src[start..start + out_w];
                    for j0 in (0..full).step_by(LANES) {
                        let pc: &[T; LANES] = p[j0..j0 + LANES].try_into().unwrap();
                        for (n, a) in acc.iter_mut().enumerate() {
                            let g0 = n * out_plane + i * out_w + j0;
                            let gc: &[T; LANES] = grad_out[g0..g0 + LANES].try_into().unwrap();
                            for t in 0..LANES {
                                a[t] += gc[t] * pc[t];
                            }
                        }
                    }
                    for (n, tl) in tail.iter_mut().enumerate() {
                        let g = &grad_out[n * out_plane + i * out_w..n * out_plane + (i + 1) * out_w];
                        for (&gv, &pv) in g[full..].iter().zip(&p[full..]) {
                            *tl += gv * pv;
                        }
                    }
                }
                for n in 0..N {
                    let sum = acc[n].iter().fold(T::zero(), |s, &a| s + a) + tail[n];
                    grad_w[n * taps + (c * kernel_h + u) * kernel_w + v] += sum;
                }
            }
        }
    }
}
