//! Oracles shared by the integration tests and the acceptance target.
//!
//! Everything here is written independently of the library code it checks:
//! finite differences for gradients, direct formulas for metrics, and
//! closed-form geometry for the simulator.
#![allow(dead_code)]

use dwrecon_core::model::{builtin_config, forward_trace, ActivationCache, BuiltinModel, ForwardTrace};
use dwrecon_core::nncore::{
    conv2d_backward, conv2d_forward, inception_backward, inception_forward, maxout_backward, maxout_forward,
    mse_loss, ConvLayer, InceptionBlock,
};
use dwrecon_core::recon::envelope;
use dwrecon_core::trainer::{batch_gradients, Schedule, ScheduleAction};
use dwrecon_core::ussim::{
    acquire, das_beamform, record_layout, simulate_rf, AcquisitionConfig, PhantomSpec, Scatterer, Sector, SimOptions,
};
use dwrecon_core::{RfImage, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_tensor(rng: &mut ChaCha8Rng, dims: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(dims, |_| rng.sample(StandardNormal)).unwrap()
}

// ---------------------------------------------------------------------------
// finite differences

pub const FD_STEP: f64 = 1e-6;
pub const GRAD_TOLERANCE: f64 = 1e-5;

/// Relative error of one gradient component.
///
/// The denominator is floored at 1e-3 of the largest component of the same
/// gradient tensor (`scale`): central differences carry around 1e-9 of
/// rounding noise, which would otherwise dominate components that are
/// exactly zero, such as those of dead maxout pieces.
pub fn rel_err(analytic: f64, numeric: f64, scale: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    if diff == 0.0 {
        return 0.0;
    }
    diff / analytic.abs().max(numeric.abs()).max(1e-3 * scale)
}

/// Largest relative error of `analytic` against central differences of
/// `loss` over every coordinate of `x`. `loss` returns `None` when the
/// perturbation crossed a kink (a maxout winner changed); such coordinates
/// are skipped.
fn fd_all(x: &Tensor<f64>, analytic: &Tensor<f64>, loss: impl FnMut(&Tensor<f64>) -> Option<f64>) -> (f64, usize) {
    fd_all_step(x, analytic, FD_STEP, loss)
}

fn fd_all_step(
    x: &Tensor<f64>,
    analytic: &Tensor<f64>,
    step: f64,
    mut loss: impl FnMut(&Tensor<f64>) -> Option<f64>,
) -> (f64, usize) {
    assert_eq!(x.dims(), analytic.dims());
    let scale = analytic.max_abs();
    let mut worst = 0.0f64;
    let mut skipped = 0;
    let mut probe = x.clone();
    for i in 0..x.len() {
        let v = x.data()[i];
        probe.data_mut()[i] = v + step;
        let up = loss(&probe);
        probe.data_mut()[i] = v - step;
        let down = loss(&probe);
        probe.data_mut()[i] = v;
        match (up, down) {
            (Some(u), Some(d)) => worst = worst.max(rel_err(analytic.data()[i], (u - d) / (2.0 * step), scale)),
            _ => skipped += 1,
        }
    }
    (worst, skipped)
}

fn dot(a: &Tensor<f64>, b: &Tensor<f64>) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum()
}

fn random_conv(rng: &mut ChaCha8Rng, c: usize, k: usize, kernel: (usize, usize), pad: (usize, usize)) -> ConvLayer<f64> {
    let weights = normal_tensor(rng, &[k, c, kernel.0, kernel.1]);
    let biases = normal_tensor(rng, &[k]);
    ConvLayer::from_params(weights, biases, pad).unwrap()
}

/// Projection loss `sum(r * conv(x))` checked on input, weights and biases.
pub fn conv_gradcheck(seed: u64) -> f64 {
    let mut g = rng(seed);
    let layer = random_conv(&mut g, 2, 3, (3, 3), (1, 1));
    let x = normal_tensor(&mut g, &[1, 2, 5, 5]);
    let r = normal_tensor(&mut g, &[1, 3, 5, 5]);
    conv_check(&layer, &x, &r)
}

/// Same check for a 1×1 convolution over many channels.
pub fn conv1x1_gradcheck(seed: u64) -> f64 {
    let mut g = rng(seed);
    let layer = random_conv(&mut g, 8, 4, (1, 1), (0, 0));
    let x = normal_tensor(&mut g, &[2, 8, 3, 4]);
    let r = normal_tensor(&mut g, &[2, 4, 3, 4]);
    conv_check(&layer, &x, &r)
}

fn conv_check(layer: &ConvLayer<f64>, x: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    let grads = conv2d_backward(r, x, layer).unwrap();
    let (a, _) = fd_all(x, grads.input.as_ref().unwrap(), |xp| Some(dot(r, &conv2d_forward(xp, layer).unwrap())));
    let (b, _) = fd_all(&layer.weights, &grads.weights, |wp| {
        let l = ConvLayer::from_params(wp.clone(), layer.biases.clone(), (layer.pad_h, layer.pad_w)).unwrap();
        Some(dot(r, &conv2d_forward(x, &l).unwrap()))
    });
    let (c, _) = fd_all(&layer.biases, &grads.biases, |bp| {
        let l = ConvLayer::from_params(layer.weights.clone(), bp.clone(), (layer.pad_h, layer.pad_w)).unwrap();
        Some(dot(r, &conv2d_forward(x, &l).unwrap()))
    });
    a.max(b).max(c)
}

/// Convolution followed by maxout; coordinates whose perturbation changes
/// a winner are skipped (returned as the second value).
pub fn maxout_gradcheck(seed: u64) -> (f64, usize) {
    let mut g = rng(seed);
    let k = 2;
    let layer = random_conv(&mut g, 2, 4, (3, 3), (1, 1));
    let x = normal_tensor(&mut g, &[1, 2, 5, 5]);
    let r = normal_tensor(&mut g, &[1, 2, 5, 5]);
    let (_, argmax) = maxout_forward(&conv2d_forward(&x, &layer).unwrap(), k).unwrap();
    let pre_grad = maxout_backward(&r, &argmax, k).unwrap();
    let grads = conv2d_backward(&pre_grad, &x, &layer).unwrap();
    let eval = |xp: &Tensor<f64>, l: &ConvLayer<f64>| {
        let (out, am) = maxout_forward(&conv2d_forward(xp, l).unwrap(), k).unwrap();
        (am == argmax).then(|| dot(&r, &out))
    };
    let (a, sa) = fd_all(&x, grads.input.as_ref().unwrap(), |xp| eval(xp, &layer));
    let (b, sb) = fd_all(&layer.weights, &grads.weights, |wp| {
        eval(&x, &ConvLayer::from_params(wp.clone(), layer.biases.clone(), (1, 1)).unwrap())
    });
    (a.max(b), sa + sb)
}

/// Two-path inception block with different kernel shapes.
pub fn inception_gradcheck(seed: u64) -> f64 {
    let mut g = rng(seed);
    let paths = vec![random_conv(&mut g, 2, 2, (3, 3), (1, 1)), random_conv(&mut g, 2, 3, (5, 3), (2, 1))];
    let block = InceptionBlock::new(paths).unwrap();
    let x = normal_tensor(&mut g, &[1, 2, 7, 6]);
    let r = normal_tensor(&mut g, &[1, 5, 7, 6]);
    let grads = inception_backward(&r, &x, &block, true).unwrap();
    let (mut worst, _) = fd_all(&x, grads.input.as_ref().unwrap(), |xp| {
        Some(dot(&r, &inception_forward(xp, &block).unwrap()))
    });
    for (pi, (gw, gb)) in grads.paths.iter().enumerate() {
        let with = |w: &Tensor<f64>, b: &Tensor<f64>| {
            let mut blk = block.clone();
            let p = &block.paths[pi];
            blk.paths[pi] = ConvLayer::from_params(w.clone(), b.clone(), (p.pad_h, p.pad_w)).unwrap();
            Some(dot(&r, &inception_forward(&x, &blk).unwrap()))
        };
        let p = &block.paths[pi];
        worst = worst.max(fd_all(&p.weights, gw, |wp| with(wp, &p.biases)).0);
        worst = worst.max(fd_all(&p.biases, gb, |bp| with(&p.weights, bp)).0);
    }
    worst
}

/// The loss is quadratic, so central differences are exact up to rounding
/// for any step; a large step keeps that rounding far below the tolerance.
pub fn mse_gradcheck(seed: u64) -> f64 {
    let mut g = rng(seed);
    let pred = normal_tensor(&mut g, &[2, 1, 4, 3]);
    let target = normal_tensor(&mut g, &[2, 1, 4, 3]);
    let (_, grad) = mse_loss(&pred, &target).unwrap();
    fd_all_step(&pred, &grad, 1e-3, |p| Some(mse_loss(p, &target).unwrap().0)).0
}

fn winners(trace: &ForwardTrace<f64>) -> Vec<Vec<u16>> {
    trace
        .activations
        .iter()
        .map(|a| match a {
            ActivationCache::Maxout { argmax, .. } => argmax.offsets().to_vec(),
            ActivationCache::Relu { pre_activation } => pre_activation.data().iter().map(|&v| (v > 0.0) as u16).collect(),
            ActivationCache::Identity => Vec::new(),
        })
        .collect()
}

/// While no maxout winner changes, the network output is linear in any one
/// weight and the loss quadratic, so central differences are exact up to
/// rounding at any step. A step of 1e-4 keeps that rounding (about 1e-10
/// absolute at 1e-6) well below the tolerance; perturbations that do move a
/// winner are detected and redrawn.
const NETWORK_STEP: f64 = 1e-4;

/// Desk-scale IDNet-4 with MSE loss: `per_tensor` random coordinates of
/// every parameter tensor are compared against central differences.
/// Returns the worst relative error and how many coordinates were checked.
pub fn network_gradcheck(seed: u64, per_tensor: usize) -> (f64, usize) {
    let config = builtin_config(BuiltinModel::Idnet4, 4).unwrap();
    let mut ckpt = dwrecon_core::model::build::<f64>(&config, seed).unwrap();
    let mut g = rng(seed ^ 0xfeed);
    // nonzero biases so their gradients are exercised too
    for p in ckpt.params_mut() {
        if p.ndim() == 1 {
            p.data_mut().iter_mut().for_each(|b| *b = 0.1 * g.sample::<f64, _>(StandardNormal));
        }
    }
    let x = normal_tensor(&mut g, &[1, 3, 40, 12]);
    let y = normal_tensor(&mut g, &[1, 1, 40, 12]);
    let (_, grads) = batch_gradients(&ckpt, &x, &y).unwrap();
    let base = winners(&forward_trace(&ckpt, &x).unwrap());
    let mut worst = 0.0f64;
    let mut checked = 0;
    for t in 0..grads.len() {
        let n = grads[t].len();
        let mut done = 0;
        let mut attempts = 0;
        while done < per_tensor.min(n) && attempts < 20 * per_tensor {
            attempts += 1;
            let i = g.random_range(0..n);
            let v = ckpt.params()[t].data()[i];
            let mut eval = |value: f64| {
                ckpt.params_mut()[t].data_mut()[i] = value;
                let trace = forward_trace(&ckpt, &x).unwrap();
                let same = winners(&trace) == base;
                let loss = mse_loss(&trace.output, &y).unwrap().0;
                same.then_some(loss)
            };
            let up = eval(v + NETWORK_STEP);
            let down = eval(v - NETWORK_STEP);
            ckpt.params_mut()[t].data_mut()[i] = v;
            if let (Some(u), Some(d)) = (up, down) {
                worst = worst.max(rel_err(grads[t].data()[i], (u - d) / (2.0 * NETWORK_STEP), grads[t].max_abs()));
                done += 1;
                checked += 1;
            }
        }
    }
    (worst, checked)
}

// ---------------------------------------------------------------------------
// metric oracles, one expression each

pub fn ref_psnr(p: &[f64], r: &[f64]) -> f64 {
    20.0 * (r.iter().map(|v| v.abs()).fold(0.0, f64::max)
        / (p.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64).sqrt())
    .log10()
}

pub fn ref_ssim(p: &[f64], r: &[f64]) -> f64 {
    let n = p.len() as f64;
    let (mp, mr) = (p.iter().sum::<f64>() / n, r.iter().sum::<f64>() / n);
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    (2.0 * mp * mr + c1) * (2.0 * p.iter().zip(r).map(|(a, b)| (a - mp) * (b - mr)).sum::<f64>() / n + c2)
        / ((mp * mp + mr * mr + c1)
            * (p.iter().map(|a| (a - mp).powi(2)).sum::<f64>() / n + r.iter().map(|b| (b - mr).powi(2)).sum::<f64>() / n + c2))
}

fn ref_bin(v: f64, lo: f64, hi: f64, bins: usize) -> usize {
    (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1)
}

/// Direct double sum of `p(a,b) ln(p(a,b) / (p(a) p(b)))`.
pub fn ref_mi(a: &[f64], b: &[f64], bins: usize) -> f64 {
    let range = |x: &[f64]| (x.iter().cloned().fold(f64::INFINITY, f64::min), x.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
    let ((la, ha), (lb, hb)) = (range(a), range(b));
    let n = a.len() as f64;
    let pairs: Vec<(usize, usize)> = a.iter().zip(b).map(|(&x, &y)| (ref_bin(x, la, ha, bins), ref_bin(y, lb, hb, bins))).collect();
    let mut mi = 0.0;
    for i in 0..bins {
        for j in 0..bins {
            let pij = pairs.iter().filter(|&&(x, y)| x == i && y == j).count() as f64 / n;
            let pi = pairs.iter().filter(|&&(x, _)| x == i).count() as f64 / n;
            let pj = pairs.iter().filter(|&&(_, y)| y == j).count() as f64 / n;
            if pij > 0.0 {
                mi += pij * (pij / (pi * pj)).ln();
            }
        }
    }
    mi
}

/// CR and CNR from explicit pixel lists (population variance).
pub fn ref_cr_cnr(target: &[f64], background: &[f64]) -> (f64, f64) {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let var = |x: &[f64]| x.iter().map(|v| (v - mean(x)).powi(2)).sum::<f64>() / x.len() as f64;
    (
        -20.0 * (mean(target) / mean(background)).log10(),
        20.0 * ((mean(target) - mean(background)).abs() / (var(target) + var(background)).sqrt()).log10(),
    )
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

// ---------------------------------------------------------------------------
// schedule oracle

/// Step-by-step simulator of the halving rule, written from its description:
/// the counter of epochs without strict improvement halves the rate each
/// time it reaches a multiple of `lr_patience` and stops at `stop_patience`.
pub fn reference_schedule(losses: &[f64], lr: f64, lr_patience: usize, stop_patience: usize) -> Vec<(f64, bool)> {
    let mut best = f64::INFINITY;
    let mut since = 0;
    let mut lr = lr;
    let mut out = Vec::new();
    for &l in losses {
        if l < best {
            best = l;
            since = 0;
            out.push((lr, false));
            continue;
        }
        since += 1;
        if since >= stop_patience {
            out.push((lr, true));
            break;
        }
        if since % lr_patience == 0 {
            lr /= 2.0;
        }
        out.push((lr, false));
    }
    out
}

pub fn run_schedule(losses: &[f64], lr: f64, lr_patience: usize, stop_patience: usize) -> Vec<(f64, bool)> {
    let mut s = Schedule::new(lr, lr_patience, stop_patience);
    let mut out = Vec::new();
    for &l in losses {
        let action = s.update(l);
        out.push((s.lr, action == ScheduleAction::Stop));
        if action == ScheduleAction::Stop {
            break;
        }
    }
    out
}

/// Epochs (1-based) at which a constant loss first halves the rate and stops.
pub fn constant_loss_events() -> (Option<usize>, Option<usize>) {
    let mut s = Schedule::new(1e-4, 20, 40);
    let (mut halved, mut stopped) = (None, None);
    for epoch in 1..=100 {
        match s.update(1.0) {
            ScheduleAction::Halved if halved.is_none() => halved = Some(epoch),
            ScheduleAction::Stop => {
                stopped = Some(epoch);
                break;
            }
            _ => {}
        }
    }
    (halved, stopped)
}

// ---------------------------------------------------------------------------
// simulation oracles

pub fn single_scatterer(config: &AcquisitionConfig, x: f64, z: f64) -> PhantomSpec {
    let opts = config.phantom_options();
    PhantomSpec {
        sector: Sector { r_min: 0.0, ..opts.sector },
        diffuse: vec![],
        anechoic: vec![],
        points: vec![Scatterer { x, z, amplitude: 1.0 }],
    }
}

/// Peak sample of the center element for an on-axis scatterer at depth `z`
/// under the unsteered transmit, against `round(2 z / c fs) + lead`.
pub fn peak_time_offset(z: f64) -> i64 {
    let config = AcquisitionConfig::desk();
    let mut seq = config.sequence.clone();
    seq.angles = vec![0.0];
    seq.input_angles = vec![0.0];
    let data = simulate_rf(&single_scatterer(&config, 0.0, z), &config.probe, &seq, &SimOptions::default()).unwrap();
    let probe = &config.probe;
    let (lead, _) = record_layout(probe, config.grid.depth_end);
    let e = probe.element_count / 2; // the two middle elements straddle the axis
    let trace = data.transmits[0].outer(e);
    let peak = (0..trace.len()).max_by(|&a, &b| trace[a].abs().total_cmp(&trace[b].abs())).unwrap();
    // geometric delay to element e: transmit leg z, receive leg to the element
    let ex = probe.element_x(e);
    let expected = ((z + (z * z + ex * ex).sqrt()) / probe.speed_of_sound * probe.sampling_frequency).round() as i64
        + lead as i64;
    peak as i64 - expected
}

/// Grid-cell distance between the envelope peak of a beamformed single
/// scatterer and its true polar coordinates, for transmit `index`.
pub fn beamformed_peak_offset(x: f64, z: f64, index: usize) -> (f64, f64) {
    let config = AcquisitionConfig::desk();
    let data = simulate_rf(&single_scatterer(&config, x, z), &config.probe, &config.sequence, &config.sim).unwrap();
    let (img, _) = das_beamform(&data, &config.probe, &config.sequence, index, &config.grid, &config.das).unwrap();
    let env = envelope(&img);
    let w = env.width();
    let peak = (0..env.data.len()).max_by(|&a, &b| env.data.data()[a].total_cmp(&env.data.data()[b])).unwrap();
    let (row, col) = config.grid.locate(x, z);
    ((peak / w) as f64 - row, (peak % w) as f64 - col)
}

/// Largest relative deviation between the stack of a phantom and the
/// column-flipped stack of its mirror image acquired with negated angles.
pub fn mirror_deviation(phantom: &PhantomSpec, config: &AcquisitionConfig) -> f64 {
    let a = acquire(phantom, config).unwrap().stack;
    let mut mirrored = config.clone();
    mirrored.sequence = config.sequence.mirrored();
    let b = acquire(&phantom.mirrored(), &mirrored).unwrap().stack;
    let scale = a.data.max_abs();
    let (h, w) = (a.height(), a.width());
    let mut worst = 0.0f64;
    for i in 0..a.count() {
        // angle i of the original is angle -i of the mirror
        let j = mirrored.sequence.angles.iter().position(|&t| t == -config.sequence.angles[i]).unwrap();
        let (pa, pb) = (a.plane(i), b.plane(j));
        for r in 0..h {
            for c in 0..w {
                worst = worst.max((pa[r * w + c] - pb[r * w + (w - 1 - c)]).abs() / scale);
            }
        }
    }
    worst
}

pub fn image(h: usize, w: usize, f: impl FnMut(usize) -> f64) -> RfImage {
    RfImage::new(Tensor::from_fn(&[h, w], f).unwrap()).unwrap()
}
