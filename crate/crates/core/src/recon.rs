//! Coherent compounding, network reconstruction and B-mode formation.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::model::{forward, Checkpoint};
use crate::tensor::{Element, Tensor};
use crate::ussim::{PolarGrid, RfImage, RfStack};

/// Mean of the selected beamformed images.
pub fn compound(stack: &RfStack, indices: &[usize]) -> Result<RfImage> {
    if indices.is_empty() {
        return Err(Error::invalid("compounding needs at least one transmit"));
    }
    let (h, w) = (stack.height(), stack.width());
    let mut acc = vec![0.0; h * w];
    for &i in indices {
        if i >= stack.count() {
            return Err(Error::invalid(format!("transmit {i} out of range for {} images", stack.count())));
        }
        for (a, &v) in acc.iter_mut().zip(stack.plane(i)) {
            *a += v;
        }
    }
    let n = indices.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    RfImage::new(Tensor::from_vec(&[h, w], acc)?)
}

/// Runs a trained network on an input stack.
pub fn reconstruct<T: Element>(ckpt: &Checkpoint<T>, x: &RfStack) -> Result<RfImage> {
    let scale = ckpt.meta.input_scale;
    let mut input = x.to_batch::<T>();
    input.scale(T::from_f64(scale));
    let mut out = forward(ckpt, &input)?;
    out.scale(T::from_f64(1.0 / scale));
    RfImage::from_batch(&out)
}

/// Magnitude of the analytic signal along depth for every line.
///
/// The analytic signal is built on the line's own length: negative
/// frequencies are zeroed, positive ones doubled, DC and Nyquist kept.
pub fn envelope(rf: &RfImage) -> RfImage {
    let (h, w) = (rf.height(), rf.width());
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(h);
    let inv = planner.plan_fft_inverse(h);
    let mut out = vec![0.0; h * w];
    let mut buf = vec![Complex::new(0.0, 0.0); h];
    // bins 1..=(h-1)/2 are strictly positive frequencies for odd and even h
    let positive = (h - 1) / 2;
    for col in 0..w {
        for (row, c) in buf.iter_mut().enumerate() {
            *c = Complex::new(rf.at(row, col), 0.0);
        }
        fwd.process(&mut buf);
        for (k, c) in buf.iter_mut().enumerate() {
            if (1..=positive).contains(&k) {
                *c *= 2.0;
            } else if k > h / 2 {
                *c = Complex::new(0.0, 0.0);
            }
        }
        inv.process(&mut buf);
        for row in 0..h {
            out[row * w + col] = buf[row].norm() / h as f64;
        }
    }
    RfImage {
        data: Tensor::from_vec(&[h, w], out).expect("dims"),
    }
}

/// Log-compressed envelope in dB relative to its maximum, clipped at `-dynamic_range`.
#[derive(Clone, Debug, PartialEq)]
pub struct BMode {
    pub db: Tensor<f64>,
    pub dynamic_range: f64,
}

pub fn log_compress(env: &RfImage, dynamic_range: f64) -> Result<BMode> {
    if !(dynamic_range > 0.0 && dynamic_range.is_finite()) {
        return Err(Error::invalid(format!("dynamic range must be positive, got {dynamic_range}")));
    }
    let peak = env.data.max_abs();
    if !(peak > 0.0) {
        return Err(Error::invalid("cannot log-compress an all-zero envelope"));
    }
    let db = env.data.map(|v| (20.0 * (v.abs() / peak).log10()).max(-dynamic_range));
    Ok(BMode { db, dynamic_range })
}

/// Envelope detection followed by log compression.
pub fn bmode(rf: &RfImage, dynamic_range: f64) -> Result<BMode> {
    log_compress(&envelope(rf), dynamic_range)
}

impl BMode {
    /// Maps `[-dynamic_range, 0]` dB onto `[0, 255]`.
    pub fn to_gray(&self) -> Vec<u8> {
        self.db
            .data()
            .iter()
            .map(|&d| gray(d, self.dynamic_range))
            .collect()
    }
}

fn gray(db: f64, dr: f64) -> u8 {
    (((db + dr) / dr).clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Bilinear scan conversion of a polar B-mode onto a Cartesian raster of
/// `width` pixels spanning the sector; the height follows from the aspect
/// ratio. Pixels outside the sector are black. Returns `(height, width, gray)`.
pub fn scan_convert(b: &BMode, grid: &PolarGrid, width: usize) -> Result<(usize, usize, Vec<u8>)> {
    let (h, w) = (b.db.dims()[0], b.db.dims()[1]);
    if (h, w) != grid.dims() {
        return Err(Error::shape(format!("B-mode {h}×{w} does not match grid {:?}", grid.dims())));
    }
    if width < 2 {
        return Err(Error::invalid("scan conversion needs at least 2 pixels across"));
    }
    let half = grid.sector / 2.0;
    let x_max = grid.depth_end * half.sin();
    let z_min = grid.depth_start * half.cos();
    let z_max = grid.depth_end;
    let step = 2.0 * x_max / (width - 1) as f64;
    let height = ((z_max - z_min) / step).round() as usize + 1;
    let db = b.db.data();
    let mut out = vec![0u8; height * width];
    for py in 0..height {
        for px in 0..width {
            let x = grid.apex.0 - x_max + px as f64 * step;
            let z = grid.apex.1 + z_min + py as f64 * step;
            let (r, c) = grid.locate(x, z);
            if !(r >= 0.0 && c >= 0.0 && r <= (h - 1) as f64 && c <= (w - 1) as f64) {
                continue;
            }
            let (r0, c0) = ((r as usize).min(h - 2), (c as usize).min(w - 2));
            let (fr, fc) = (r - r0 as f64, c - c0 as f64);
            let at = |i: usize, j: usize| db[i * w + j];
            let v = (1.0 - fr) * ((1.0 - fc) * at(r0, c0) + fc * at(r0, c0 + 1))
                + fr * ((1.0 - fc) * at(r0 + 1, c0) + fc * at(r0 + 1, c0 + 1));
            out[py * width + px] = gray(v, b.dynamic_range);
        }
    }
    Ok((height, width, out))
}
