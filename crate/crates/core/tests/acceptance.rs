//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion on
//! stdout and progress on stderr. The target itself succeeds so that the
//! rest of the workspace tests still run; set `DWRECON_ACCEPT_STRICT=1` to
//! exit with status 1 when any criterion fails.
//!
//! Simulated samples are kept under cargo's test scratch directory (or
//! `DWRECON_ACCEPT_CACHE`) and reused while the acquisition settings match.
//! The timing clause of criterion 4 then excludes simulation.
//!
//! Development overrides (a shortened run reports the size clause of
//! criterion 4 as failed):
//! - `DWRECON_ACCEPT_SAMPLES`: number of simulated training samples
//! - `DWRECON_ACCEPT_EPOCHS`: epoch cap for both networks

mod common;

use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use dwrecon_core::analysis::{activation_map, depth_contribution, ActivationMap, Attribution};
use dwrecon_core::io::{read_tensor, write_tensor};
use dwrecon_core::metrics::{
    cr_cnr, fidelity, histogram_entropy, mutual_information, psnr, region_report, ssim, FidelitySummary, Region,
    RegionReport, RoiSpec, DEFAULT_BINS,
};
use dwrecon_core::model::{builtin_config, param_count, BuiltinModel, Checkpoint, ModelConfig};
use dwrecon_core::recon::{compound, reconstruct};
use dwrecon_core::trainer::{train, Dataset, TrainConfig, DEFAULT_FRACTIONS};
use dwrecon_core::ussim::{acquire, acquire_sample, make_phantom, sample_seeds, PhantomKind, RfImage, RfStack, Sample};
use dwrecon_core::{AcquisitionConfig, Tensor};
use rand::Rng;

const SAMPLES: usize = 560;
const DATASET_SEED: u64 = 2024;
const SPLIT_SEED: u64 = 11;
/// Channel noise giving roughly -3 dB image SNR per transmit on the desk grid.
const CHANNEL_NOISE_STD: f64 = 1.0e4;
const NOISE_SEED: u64 = 99;
const MODEL_SCALE: usize = 4;
const LEARNING_RATE: f64 = 5e-4;
const MAX_EPOCHS: usize = 150;
const TRAIN_SEED: u64 = 3;
const CYST_SEED: u64 = 0xC1;
const WIRE_SEED: u64 = 0x1E;
const TIME_LIMIT_SECONDS: f64 = 4.0 * 3600.0;

struct Report {
    results: Vec<(usize, bool)>,
}

impl Report {
    fn record(&mut self, id: usize, title: &str, pass: bool, detail: String) {
        println!("criterion {id:>2} {} {title}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.results.push((id, pass));
    }
}

fn env_usize(name: &str, default: usize) -> usize {
    std::env::var(name).ok().and_then(|v| v.parse().ok()).unwrap_or(default)
}

fn acquisition() -> AcquisitionConfig {
    let mut config = AcquisitionConfig::desk();
    config.sim.noise_std = CHANNEL_NOISE_STD;
    config.sim.noise_seed = NOISE_SEED;
    config
}

// ---------------------------------------------------------------------------
// quick criteria

fn parameter_counts(report: &mut Report) {
    let full = param_count(&builtin_config(BuiltinModel::Idnet4, 1).unwrap()).unwrap();
    let baseline = param_count(&builtin_config(BuiltinModel::FixedKernelBaseline, 1).unwrap()).unwrap();
    let ratio = baseline as f64 / 1.9e6;
    let rounded = (full as f64 / 1e5).round() / 10.0;
    report.record(
        1,
        "parameter count",
        full == 1_715_972 && rounded == 1.7 && (ratio - 1.0).abs() <= 0.1,
        format!("idnet4 {full} (~{rounded} M), baseline {baseline} ({:+.1}% of 1.9 M)", 100.0 * (ratio - 1.0)),
    );
}

fn gradient_suite(report: &mut Report) {
    let started = Instant::now();
    let mut worst = [0.0f64; 6];
    let mut skipped = 0;
    let mut network_checked = 0;
    for seed in 0..20 {
        worst[0] = worst[0].max(conv_gradcheck(seed));
        let (m, s) = maxout_gradcheck(seed);
        worst[1] = worst[1].max(m);
        skipped += s;
        worst[2] = worst[2].max(inception_gradcheck(seed));
        worst[3] = worst[3].max(conv1x1_gradcheck(seed));
        worst[4] = worst[4].max(mse_gradcheck(seed));
        let (n, c) = network_gradcheck(seed, 2);
        worst[5] = worst[5].max(n);
        network_checked += c;
    }
    let seconds = started.elapsed().as_secs_f64();
    let names = ["conv2d", "maxout", "inception", "conv1x1", "mse", "idnet4 desk"];
    let detail = names
        .iter()
        .zip(worst)
        .map(|(n, w)| format!("{n} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    report.record(
        2,
        "gradient suite",
        worst.iter().all(|&w| w < GRAD_TOLERANCE) && seconds < 120.0,
        format!(
            "worst relative error {detail}; {network_checked} network coordinates, {skipped} maxout kinks skipped; {seconds:.1}s"
        ),
    );
}

fn architecture_trace(report: &mut Report) {
    let expected: Vec<[usize; 3]> = [64, 32, 16, 8, 1].iter().map(|&c| [c, 512, 256]).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for model in [BuiltinModel::Idnet4, BuiltinModel::Idnet2, BuiltinModel::Idnet8] {
        let config = builtin_config(model, 1).unwrap();
        let trace = config.shape_trace(512, 256).unwrap();
        // the static trace must agree with what a real forward pass produces
        let ran = executed_channels(&config, 70, 18);
        let ok = trace == expected && ran == [64, 32, 16, 8, 1];
        pass &= ok;
        notes.push(format!("{model} {}", if ok { "matches" } else { "differs" }));
    }
    report.record(3, "architecture trace", pass, format!("{} (64/32/16/8/1 × 512 × 256)", notes.join(", ")));
}

/// Channel counts observed after every layer of a forward pass on an `h × w` input.
fn executed_channels(config: &ModelConfig, h: usize, w: usize) -> Vec<usize> {
    let ckpt = dwrecon_core::model::build::<f32>(config, 0).unwrap();
    let x = Tensor::<f32>::zeros(&[1, 3, h, w]).unwrap();
    let trace = dwrecon_core::model::forward_trace(&ckpt, &x).unwrap();
    let mut channels: Vec<usize> = trace.inputs[1..].iter().map(|t| t.dims()[1]).collect();
    channels.push(trace.output.dims()[1]);
    assert!(trace.output.dims()[2..] == [h, w]);
    channels
}

fn metric_oracles(report: &mut Report) {
    let mut rng = rng(8);
    let (h, w) = (24, 16);
    let mut worst = 0.0f64;
    let mut entropy_exact = true;
    for pair in 0..100 {
        // half the pairs are strongly related so MI and SSIM are far from zero
        let a: Vec<f64> = (0..h * w).map(|_| rng.random::<f64>().powi(2) + 0.01).collect();
        let mix = if pair % 2 == 0 { 0.9 } else { 0.1 };
        let b: Vec<f64> = a.iter().map(|&v| mix * v + (1.0 - mix) * rng.random::<f64>() + 0.01).collect();
        worst = worst.max(rel_diff(psnr(&b, &a).unwrap(), ref_psnr(&b, &a)));
        worst = worst.max(rel_diff(ssim(&b, &a).unwrap(), ref_ssim(&b, &a)));
        let bins = [DEFAULT_BINS, 16, 7][pair % 3];
        worst = worst.max(rel_diff(mutual_information(&a, &b, bins).unwrap(), ref_mi(&a, &b, bins)));

        // CR/CNR on two fixed rectangles, pixel lists gathered independently
        let env = image(h, w, |i| b[i]);
        let target = Region::Rect { row0: 2, row1: 9, col0: 2, col1: 8 };
        let background = Region::Rect { row0: 12, row1: 22, col0: 4, col1: 14 };
        let gather = |r0: usize, r1: usize, c0: usize, c1: usize| -> Vec<f64> {
            (r0..r1).flat_map(|r| (c0..c1).map(move |c| (r, c))).map(|(r, c)| b[r * w + c]).collect()
        };
        let (cr, cnr) = cr_cnr(&env, &target, &background).unwrap();
        let (rcr, rcnr) = ref_cr_cnr(&gather(2, 9, 2, 8), &gather(12, 22, 4, 14));
        worst = worst.max(rel_diff(cr, rcr)).max(rel_diff(cnr, rcnr));

        entropy_exact &= mutual_information(&a, &a, DEFAULT_BINS).unwrap() == histogram_entropy(&a, DEFAULT_BINS).unwrap();
    }

    let (halved, stopped) = constant_loss_events();
    let decreasing: Vec<f64> = (0..100).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let steady = run_schedule(&decreasing, 1e-4, 20, 40).iter().all(|&(lr, stop)| lr == 1e-4 && !stop);
    // 17 flat epochs followed by an improvement resets the counter before the first halving
    let mut late: Vec<f64> = vec![1.0; 18];
    late.extend(vec![0.5; 12]);
    let reset = run_schedule(&late, 1e-4, 20, 40).iter().all(|&(lr, stop)| lr == 1e-4 && !stop);
    let mut simulator_agrees = true;
    for _ in 0..50 {
        let losses: Vec<f64> = (0..120).map(|_| (rng.random_range(0..6) as f64) * 0.1).collect();
        simulator_agrees &= run_schedule(&losses, 1e-3, 5, 12) == reference_schedule(&losses, 1e-3, 5, 12);
    }
    let schedule_ok = halved == Some(21) && stopped == Some(41) && steady && reset && simulator_agrees;

    report.record(
        8,
        "metric oracles",
        worst <= 1e-9 && entropy_exact && schedule_ok,
        format!(
            "worst relative difference {worst:.1e} over 100 pairs; MI(A,A) == entropy: {entropy_exact}; \
             constant loss halves at {halved:?} and stops at {stopped:?}; other schedule examples: {}",
            steady && reset && simulator_agrees
        ),
    );
}

fn simulation_oracles(report: &mut Report) {
    let timing: Vec<i64> = [0.010, 0.025, 0.040, 0.052].iter().map(|&z| peak_time_offset(z)).collect();
    let mut cells = 0.0f64;
    for &(x, z) in &[(0.0, 0.02), (0.005, 0.03), (-0.008, 0.045)] {
        for index in [0, 15, 30] {
            let (dr, dc) = beamformed_peak_offset(x, z, index);
            cells = cells.max(dr.abs()).max(dc.abs());
        }
    }
    let config = AcquisitionConfig::desk();
    let phantom = make_phantom(PhantomKind::Mixed, &config.phantom_options(), 5).unwrap();
    let mirror = mirror_deviation(&phantom, &config);
    report.record(
        9,
        "simulation oracles",
        timing.iter().all(|t| t.abs() <= 1) && cells <= 1.0 && mirror <= 1e-6,
        format!("peak time offsets {timing:?} samples; beamformed peak within {cells:.2} cells; mirror deviation {mirror:.1e}"),
    );
}

// ---------------------------------------------------------------------------
// dataset and training

/// Simulates the training samples. Samples already stored in the cache
/// directory under the same acquisition settings are loaded instead; the seed
/// sequence is a prefix-stable stream, so a shorter run reuses its samples.
fn simulated_samples(config: &AcquisitionConfig, count: usize) -> Vec<Sample> {
    let dir = std::env::var_os("DWRECON_ACCEPT_CACHE")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_TARGET_TMPDIR")).join("acceptance-samples"));
    let key = serde_json::to_string(&(config, DATASET_SEED)).unwrap();
    let reusable = std::fs::read_to_string(dir.join("key.json")).ok().as_deref() == Some(key.as_str());
    if !reusable {
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("key.json"), &key).unwrap();
    }
    let started = Instant::now();
    let opts = config.phantom_options();
    let mut simulated = 0;
    sample_seeds(DATASET_SEED, count)
        .into_iter()
        .enumerate()
        .map(|(i, seed)| {
            if dir.join(format!("y{i}.dwt")).is_file() {
                return load_sample(&dir, i, config);
            }
            let phantom = make_phantom(PhantomKind::Mixed, &opts, seed).unwrap();
            let sample = acquire_sample(&phantom, &config.for_phantom_seed(seed)).unwrap();
            write_tensor(dir.join(format!("x{i}.dwt")), &sample.x.data).unwrap();
            write_tensor(dir.join(format!("y{i}.dwt")), &sample.y.data).unwrap();
            simulated += 1;
            if simulated % 20 == 0 {
                eprintln!("simulated {simulated} samples, {}/{count} ready ({:.0}s)", i + 1, started.elapsed().as_secs_f64());
            }
            sample
        })
        .collect()
}

fn load_sample(dir: &Path, i: usize, config: &AcquisitionConfig) -> Sample {
    Sample {
        x: RfStack::new(read_tensor(dir.join(format!("x{i}.dwt"))).unwrap(), config.sequence.input_angles.clone()).unwrap(),
        y: RfImage::new(read_tensor(dir.join(format!("y{i}.dwt"))).unwrap()).unwrap(),
    }
}

fn train_model(model: BuiltinModel, data: &Dataset, epochs: usize) -> Checkpoint<f32> {
    let config = builtin_config(model, MODEL_SCALE).unwrap();
    let cfg = TrainConfig {
        initial_lr: LEARNING_RATE,
        max_epochs: epochs,
        seed: TRAIN_SEED,
        ..TrainConfig::default()
    };
    let outcome = train::<f32>(&config, data, &cfg, &mut |r| {
        eprintln!(
            "{model} epoch {:>3}: train {:.4e} val {:.4e} lr {:.1e} ({:.0}s)",
            r.epoch, r.train_loss, r.val_loss, r.lr, r.seconds
        )
    })
    .unwrap();
    eprintln!(
        "{model}: {} epochs, best val {:.4e}{}",
        outcome.log.len(),
        outcome.best.meta.best_val_loss.unwrap_or(f64::NAN),
        if outcome.stopped_early { ", stopped early" } else { "" }
    );
    outcome.best
}

/// Scaled MSE of the three-transmit compound on `indices`, the loss a network must beat.
fn compound_loss(data: &Dataset, indices: &[usize]) -> f64 {
    indices
        .iter()
        .map(|&i| {
            let s = &data.samples[i];
            let c = compound(&s.x, &[0, 1, 2]).unwrap();
            c.data.data().iter().zip(s.y.data.data()).map(|(a, b)| ((a - b) * data.scale).powi(2)).sum::<f64>()
                / c.data.len() as f64
        })
        .sum::<f64>()
        / indices.len() as f64
}

fn training_gain(report: &mut Report, data: &Dataset, net: &Checkpoint<f32>, started: Instant) {
    let (mut ours, mut base) = (Vec::new(), Vec::new());
    for &i in &data.split.test {
        let s = &data.samples[i];
        ours.push(fidelity(&reconstruct(net, &s.x).unwrap(), &s.y, DEFAULT_BINS).unwrap());
        base.push(fidelity(&compound(&s.x, &[0, 1, 2]).unwrap(), &s.y, DEFAULT_BINS).unwrap());
    }
    let (a, b) = (FidelitySummary::of(&ours), FidelitySummary::of(&base));
    let (dp, ds) = (a.psnr.mean - b.psnr.mean, a.ssim.mean - b.ssim.mean);
    let sizes = (data.split.train.len(), data.split.val.len(), data.split.test.len());
    let seconds = started.elapsed().as_secs_f64();
    let sized = sizes.0 >= 400 && sizes.1 >= 80 && sizes.2 >= 80;
    report.record(
        4,
        "training gain",
        dp >= 1.0 && ds >= 0.03 && sized && seconds <= TIME_LIMIT_SECONDS,
        format!(
            "PSNR {} vs {} ({dp:+.2} dB), SSIM {} vs {} ({ds:+.3}), MI {} vs {}; split {}/{}/{}; {:.0} min",
            a.psnr, b.psnr, a.ssim, b.ssim, a.mi, b.mi, sizes.0, sizes.1, sizes.2, seconds / 60.0
        ),
    );
}

// ---------------------------------------------------------------------------
// held-out phantoms

struct HeldOut {
    grid: dwrecon_core::PolarGrid,
    rois: RoiSpec,
    stack: RfStack,
    input: RfStack,
    config: AcquisitionConfig,
}

impl HeldOut {
    fn new(kind: PhantomKind, seed: u64) -> Self {
        let config = acquisition();
        let phantom = make_phantom(kind, &config.phantom_options(), seed).unwrap();
        let acq = acquire(&phantom, &config.for_phantom_seed(seed)).unwrap();
        let input = acq.sample(&config.sequence).unwrap().x;
        Self {
            grid: config.grid.clone(),
            rois: RoiSpec::for_phantom(&phantom, &config.grid),
            stack: acq.stack,
            input,
            config,
        }
    }

    fn compound(&self, count: usize) -> RegionReport {
        let img = compound(&self.stack, &self.config.sequence.spread_indices(count).unwrap()).unwrap();
        region_report(&img, &self.rois, &self.grid).unwrap()
    }

    fn network(&self, net: &Checkpoint<f32>) -> RegionReport {
        region_report(&reconstruct(net, &self.input).unwrap(), &self.rois, &self.grid).unwrap()
    }
}

fn contrast_ordering(report: &mut Report, cyst: &HeldOut, net: &Checkpoint<f32>) {
    let sweep: Vec<(usize, RegionReport)> = (1..=31).step_by(2).map(|k| (k, cyst.compound(k))).collect();
    let at = |k: usize| &sweep.iter().find(|(n, _)| *n == k).unwrap().1;
    let ours = cyst.network(net);
    let mut pass = !ours.cnr.is_empty();
    let mut parts = Vec::new();
    for (name, &cnr) in &ours.cnr {
        let (c3, c9) = (at(3).cnr[name], at(9).cnr[name]);
        let mut running = f64::NEG_INFINITY;
        let mut worst_dip = 0.0f64;
        for (_, r) in &sweep {
            worst_dip = worst_dip.max(running - r.cnr[name]);
            running = running.max(r.cnr[name]);
        }
        pass &= c3 < cnr && cnr >= c9 && worst_dip <= 0.5;
        let curve: Vec<String> = sweep.iter().map(|(_, r)| format!("{:.2}", r.cnr[name])).collect();
        parts.push(format!(
            "{name}: 3-DW {c3:.2} < net {cnr:.2} >= 9-DW {c9:.2} dB, sweep [{}] worst dip {worst_dip:.2} dB",
            curve.join(" ")
        ));
    }
    report.record(5, "contrast ordering", pass, parts.join("; "));
}

fn resolution_ordering(report: &mut Report, wires: &HeldOut, net: &Checkpoint<f32>) {
    let env_lr = |img: &RfImage| -> Vec<Result<f64, String>> {
        let env = dwrecon_core::recon::envelope(img);
        wires
            .rois
            .wires
            .iter()
            .map(|w| dwrecon_core::metrics::lateral_resolution(&env, (w.row, w.col), &wires.grid).map_err(|e| e.to_string()))
            .collect()
    };
    let c3 = env_lr(&compound(&wires.stack, &wires.config.sequence.spread_indices(3).unwrap()).unwrap());
    let c31 = env_lr(&compound(&wires.stack, &wires.config.sequence.spread_indices(31).unwrap()).unwrap());
    let ours = env_lr(&reconstruct(net, &wires.input).unwrap());
    let mut pass = !wires.rois.wires.is_empty();
    let mut parts = Vec::new();
    for (i, w) in wires.rois.wires.iter().enumerate() {
        match (&c3[i], &c31[i], &ours[i]) {
            (Ok(a), Ok(b), Ok(n)) => {
                pass &= *n <= 1.1 * a && b <= a;
                parts.push(format!("{} 3-DW {a:.2} / 31-DW {b:.2} / net {n:.2} mm", w.name));
            }
            other => {
                pass = false;
                parts.push(format!("{} unresolved {other:?}", w.name));
            }
        }
    }
    report.record(6, "resolution ordering", pass, parts.join(", "));
}

fn ablation(report: &mut Report, cyst: &HeldOut, net: &Checkpoint<f32>, relu: &Checkpoint<f32>) {
    let (a, b) = (cyst.network(net), cyst.network(relu));
    let mut pass = !a.cnr.is_empty();
    let mut parts = Vec::new();
    for (name, &cnr) in &a.cnr {
        pass &= cnr >= b.cnr[name];
        parts.push(format!("{name} maxout {cnr:.2} vs relu {:.2} dB", b.cnr[name]));
    }
    report.record(7, "ablation direction", pass, parts.join(", "));
}

fn analysis_sanity(report: &mut Report, data: &Dataset, net: &Checkpoint<f32>) {
    // arbitrary maps first: every row must sum to 100
    let mut rng = rng(21);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let (h, w, paths) = (rng.random_range(1..40), rng.random_range(1..40), rng.random_range(1..9));
        let labels = (0..h * w).map(|_| rng.random_range(0..paths) as u8).collect();
        let map = ActivationMap::new(h, w, labels, vec![[1, 1]; paths]).unwrap();
        for row in depth_contribution(&map).rows {
            worst = worst.max((row.iter().sum::<f64>() - 100.0).abs());
        }
    }

    let mut mean_rows: Vec<Vec<f64>> = Vec::new();
    let mut legend = Vec::new();
    let mut weight_rows: Vec<Vec<f64>> = Vec::new();
    for &i in &data.split.test {
        let x = &data.samples[i].x;
        let dc = depth_contribution(&activation_map(net, x, Attribution::Activation).unwrap());
        let wc = depth_contribution(&activation_map(net, x, Attribution::Weight).unwrap());
        for row in &dc.rows {
            worst = worst.max((row.iter().sum::<f64>() - 100.0).abs());
        }
        accumulate(&mut mean_rows, &dc.rows);
        accumulate(&mut weight_rows, &wc.rows);
        legend = dc.legend;
    }
    let largest = (0..legend.len()).max_by_key(|&p| legend[p][0] * legend[p][1]).unwrap();
    let n = data.split.test.len() as f64;
    let h = mean_rows.len();
    let share = |rows: &[Vec<f64>], range: std::ops::Range<usize>| {
        let len = range.len() as f64;
        range.map(|r| rows[r][largest]).sum::<f64>() / len / n
    };
    let (near, far) = (share(&mean_rows, 0..h / 4), share(&mean_rows, h - h / 4..h));
    let (wnear, wfar) = (share(&weight_rows, 0..h / 4), share(&weight_rows, h - h / 4..h));
    report.record(
        10,
        "analysis sanity",
        worst <= 1e-6 && near > far,
        format!(
            "row sums within {worst:.1e} of 100; {}x{} path share {near:.1}% shallow vs {far:.1}% deep \
             (weight attribution {wnear:.1}% vs {wfar:.1}%)",
            legend[largest][0], legend[largest][1]
        ),
    );
}

fn accumulate(total: &mut Vec<Vec<f64>>, rows: &[Vec<f64>]) {
    if total.is_empty() {
        *total = vec![vec![0.0; rows[0].len()]; rows.len()];
    }
    for (t, r) in total.iter_mut().zip(rows) {
        t.iter_mut().zip(r).for_each(|(a, b)| *a += b);
    }
}

fn main() {
    let mut report = Report { results: Vec::new() };
    parameter_counts(&mut report);
    gradient_suite(&mut report);
    architecture_trace(&mut report);
    metric_oracles(&mut report);
    simulation_oracles(&mut report);

    let started = Instant::now();
    let count = env_usize("DWRECON_ACCEPT_SAMPLES", SAMPLES);
    let epochs = env_usize("DWRECON_ACCEPT_EPOCHS", MAX_EPOCHS);
    let config = acquisition();
    let data = Dataset::with_split(simulated_samples(&config, count), DEFAULT_FRACTIONS, SPLIT_SEED).unwrap();
    eprintln!(
        "three-transmit compound loss: val {:.4e}, test {:.4e}",
        compound_loss(&data, &data.split.val),
        compound_loss(&data, &data.split.test)
    );
    let net = train_model(BuiltinModel::Idnet4, &data, epochs);
    training_gain(&mut report, &data, &net, started);

    let cyst = HeldOut::new(PhantomKind::Cyst, CYST_SEED);
    let wires = HeldOut::new(PhantomKind::Wires, WIRE_SEED);
    contrast_ordering(&mut report, &cyst, &net);
    resolution_ordering(&mut report, &wires, &net);
    let relu = train_model(BuiltinModel::IdnetRelu, &data, epochs);
    ablation(&mut report, &cyst, &net, &relu);
    analysis_sanity(&mut report, &data, &net);

    report.results.sort();
    let failed: Vec<usize> = report.results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        report.results.len() - failed.len(),
        report.results.len(),
        if failed.is_empty() { String::new() } else { format!(", failed {failed:?}") }
    );
    if !failed.is_empty() && std::env::var_os("DWRECON_ACCEPT_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
