use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use clap::Args;
use dwrecon_core::io::{write_tensor, Manifest, SampleEntry, SplitLabel, MANIFEST_VERSION};
use dwrecon_core::metrics::RoiSpec;
use dwrecon_core::trainer::split_indices;
use dwrecon_core::ussim::{acquire, make_phantom, sample_seeds, simulate_samples, PhantomKind};
use dwrecon_core::Tensor;
use log::info;

use crate::files::{acquisition_config, create_dir, write_json, Target, TargetSet, TARGETS_VERSION};
use crate::user_error;

/// Mixed into the dataset seed so held-out phantoms never repeat a sample.
const TARGET_SALT: u64 = 0x7a12_9e75_0dd5_3c41;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output directory; receives `manifest.json`, `rois.json`, `samples/` and `targets/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Acquisition settings as JSON (desk-scale defaults otherwise).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "mixed", value_parser = parse_kind)]
    pub kind: PhantomKind,
    /// Train/val/test proportions.
    #[arg(long, default_value = "5,1,1")]
    pub split: String,
    /// Skip the held-out cyst and wire phantoms used by `eval`.
    #[arg(long)]
    pub no_targets: bool,
}

fn parse_kind(s: &str) -> Result<PhantomKind, String> {
    s.parse().map_err(|e: dwrecon_core::Error| e.to_string())
}

pub fn parse_fractions(s: &str) -> Result<[f64; 3]> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| user_error!("--split expects three comma-separated numbers, got '{s}'"))?;
    match parts.as_slice() {
        &[a, b, c] if parts.iter().all(|v| *v >= 0.0) && a + b + c > 0.0 => {
            let total = a + b + c;
            Ok([a / total, b / total, c / total])
        }
        _ => Err(user_error!("--split expects three non-negative proportions, got '{s}'")),
    }
}

pub fn run(args: SimulateArgs) -> Result<()> {
    if args.count == 0 {
        return Err(user_error!("--count must be at least 1"));
    }
    let config = acquisition_config(args.config.as_deref())?;
    let split = split_indices(args.count, parse_fractions(&args.split)?, args.seed)?;
    create_dir(&args.out.join("samples"))?;

    let started = Instant::now();
    let count = args.count;
    let samples = simulate_samples(&config, args.kind, count, args.seed, &|done| {
        if done % 10 == 0 || done == count {
            info!("simulated {done}/{count} ({:.0}s)", started.elapsed().as_secs_f64());
        }
    })?;

    let mut targets = Vec::new();
    if !args.no_targets {
        let opts = config.phantom_options();
        let seeds = sample_seeds(args.seed ^ TARGET_SALT, 2);
        for (kind, seed) in [PhantomKind::Cyst, PhantomKind::Wires].into_iter().zip(seeds) {
            let phantom = make_phantom(kind, &opts, seed)?;
            let stack = acquire(&phantom, &config.for_phantom_seed(seed))?.stack;
            targets.push((kind, seed, stack, RoiSpec::for_phantom(&phantom, &config.grid)));
        }
    }

    let peak = samples
        .iter()
        .map(|(_, s)| s.x.data.max_abs().max(s.y.data.max_abs()))
        .fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(user_error!("simulated data is all zero; check the acquisition config"));
    }
    let rf_scale = 1.0 / peak;
    let scaled = |t: &Tensor<f64>| t.map(|v| v * rf_scale);

    let mut labels = vec![SplitLabel::Train; count];
    split.val.iter().for_each(|&i| labels[i] = SplitLabel::Val);
    split.test.iter().for_each(|&i| labels[i] = SplitLabel::Test);
    let mut entries = Vec::with_capacity(count);
    for (i, (seed, sample)) in samples.iter().enumerate() {
        let id = format!("s{i:05}");
        let (x, y) = (format!("samples/{id}_x.dwt"), format!("samples/{id}_y.dwt"));
        write_tensor(args.out.join(&x), &scaled(&sample.x.data))?;
        write_tensor(args.out.join(&y), &scaled(&sample.y.data))?;
        entries.push(SampleEntry {
            id,
            x,
            y,
            kind: args.kind,
            phantom_seed: *seed,
            split: labels[i],
        });
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        rf_scale,
        compounding: "mean of all transmits".into(),
        input_angles: samples[0].1.x.angles.clone(),
        acquisition: config,
        samples: entries,
    };
    manifest.save(args.out.join("manifest.json"))?;

    if !targets.is_empty() {
        create_dir(&args.out.join("targets"))?;
        let mut set = TargetSet {
            format_version: TARGETS_VERSION,
            targets: Vec::new(),
        };
        for (kind, seed, stack, rois) in targets {
            let file = format!("targets/{}.dwt", kind.name());
            write_tensor(args.out.join(&file), &scaled(&stack.data))?;
            set.targets.push(Target {
                name: kind.name().into(),
                kind,
                phantom_seed: seed,
                stack: file,
                rois,
            });
        }
        write_json(&args.out.join("rois.json"), &set)?;
    }
    println!(
        "wrote {count} samples ({} train / {} val / {} test) to {}",
        split.train.len(),
        split.val.len(),
        split.test.len(),
        args.out.display()
    );
    Ok(())
}
