use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use dwrecon_core::io::{manifest_root, Manifest, SplitLabel};
use dwrecon_core::metrics::{
    cr_cnr, fidelity, lateral_resolution, Fidelity, FidelitySummary, MetricsMeta, MetricsReport, RegionReport, RoiSpec,
    DEFAULT_BINS,
};
use dwrecon_core::Error as CoreError;
use dwrecon_core::recon::{compound, envelope, reconstruct};
use dwrecon_core::ussim::spread_subset;
use dwrecon_core::{PolarGrid, RfImage};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::files::{create_dir, load_checkpoint, read_json, read_stack, write_json, TargetSet, TARGETS_VERSION};
use crate::user_error;

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Held-out targets with their regions (defaults to `rois.json` beside the manifest).
    #[arg(long)]
    pub roi: Option<PathBuf>,
    /// Directory receiving `report.json`, `table.txt` and `sweep.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "test", value_parser = parse_split)]
    pub split: SplitLabel,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
}

fn parse_split(s: &str) -> Result<SplitLabel, String> {
    match s {
        "train" => Ok(SplitLabel::Train),
        "val" => Ok(SplitLabel::Val),
        "test" => Ok(SplitLabel::Test),
        _ => Err(format!("unknown split '{s}' (train, val or test)")),
    }
}

/// Contrast and resolution of the compound of `transmits` evenly spread transmits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub transmits: usize,
    pub regions: RegionReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: SplitLabel,
    pub samples: usize,
    /// The network first, then the compound of its input transmits.
    pub methods: Vec<MetricsReport>,
    pub sweep: Vec<SweepRow>,
}

pub fn run(args: EvalArgs) -> Result<()> {
    if args.bins < 2 {
        return Err(user_error!("--bins must be at least 2"));
    }
    let manifest = Manifest::load(&args.manifest)?;
    let root = manifest_root(&args.manifest);
    let roi_path = args.roi.clone().unwrap_or_else(|| root.join("rois.json"));
    if !roi_path.is_file() {
        return Err(user_error!(
            "no ROI spec at {}; contrast and resolution need the held-out targets written by `simulate` (or pass --roi)",
            roi_path.display()
        ));
    }
    let targets: TargetSet = read_json(&roi_path, "ROI spec")?;
    if targets.format_version != TARGETS_VERSION {
        return Err(user_error!("ROI spec version {} is not supported", targets.format_version));
    }
    let net = load_checkpoint(&args.checkpoint)?;
    let indices: Vec<usize> = (0..manifest.samples.len())
        .filter(|&i| manifest.samples[i].split == args.split)
        .collect();
    if indices.is_empty() {
        return Err(user_error!("the {:?} split is empty", args.split));
    }

    let m = manifest.input_angles.len();
    let inputs: Vec<usize> = (0..m).collect();
    let (mut ours, mut base) = (Vec::new(), Vec::new());
    for &i in &indices {
        let s = manifest.load_sample(&root, i)?;
        ours.push(fidelity(&reconstruct(&net, &s.x)?, &s.y, args.bins)?);
        base.push(fidelity(&compound(&s.x, &inputs)?, &s.y, args.bins)?);
    }
    info!("scored {} {:?} samples", indices.len(), args.split);

    let roi_root = roi_path.parent().map(Path::to_path_buf).unwrap_or_default();
    let input_indices = manifest.acquisition.sequence.input_indices()?;
    let (mut net_regions, mut base_regions) = (RegionReport::default(), RegionReport::default());
    let mut sweep: BTreeMap<usize, RegionReport> = BTreeMap::new();
    for t in &targets.targets {
        let stack = read_stack(&roi_root.join(&t.stack), &manifest.acquisition.sequence.angles)?;
        let n = stack.count();
        if input_indices.iter().any(|&i| i >= n) {
            return Err(user_error!("target '{}' holds {n} transmits, fewer than the sequence", t.name));
        }
        let x = stack.subset(&input_indices)?;
        let grid = &manifest.acquisition.grid;
        merge(&mut net_regions, &t.name, regions(&reconstruct(&net, &x)?, &t.rois, grid)?);
        merge(&mut base_regions, &t.name, regions(&compound(&stack, &input_indices)?, &t.rois, grid)?);
        for k in (1..=n).step_by(2) {
            let img = compound(&stack, &spread_subset(n, k)?)?;
            merge(sweep.entry(k).or_default(), &t.name, regions(&img, &t.rois, grid)?);
        }
    }

    let meta = MetricsMeta::new(args.bins);
    let report = EvalReport {
        split: args.split,
        samples: indices.len(),
        methods: vec![
            method_report(&net.config.name, &ours, net_regions, &meta),
            method_report(&format!("compound_{m}"), &base, base_regions, &meta),
        ],
        sweep: sweep
            .into_iter()
            .map(|(transmits, regions)| SweepRow { transmits, regions })
            .collect(),
    };
    create_dir(&args.out)?;
    write_json(&args.out.join("report.json"), &report)?;
    let table = table(&report);
    std::fs::write(args.out.join("table.txt"), &table).context("writing table.txt")?;
    std::fs::write(args.out.join("sweep.csv"), sweep_csv(&report)).context("writing sweep.csv")?;
    print!("{table}");
    Ok(())
}

/// Contrast of every pair and resolution of every wire. Wires whose
/// half-maximum cannot be located are left out with a warning.
fn regions(rf: &RfImage, rois: &RoiSpec, grid: &PolarGrid) -> Result<RegionReport> {
    let env = envelope(rf);
    let mut out = RegionReport::default();
    for p in &rois.pairs {
        let (cr, cnr) = cr_cnr(&env, &p.target, &p.background)?;
        out.cr.insert(p.name.clone(), cr);
        out.cnr.insert(p.name.clone(), cnr);
    }
    for w in &rois.wires {
        match lateral_resolution(&env, (w.row, w.col), grid) {
            Ok(v) => {
                out.lr.insert(w.name.clone(), v);
            }
            Err(CoreError::UnresolvedTarget(why)) => warn!("{}: {why}", w.name),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

fn merge(into: &mut RegionReport, prefix: &str, from: RegionReport) {
    let key = |k: String| format!("{prefix}/{k}");
    into.cr.extend(from.cr.into_iter().map(|(k, v)| (key(k), v)));
    into.cnr.extend(from.cnr.into_iter().map(|(k, v)| (key(k), v)));
    into.lr.extend(from.lr.into_iter().map(|(k, v)| (key(k), v)));
}

fn method_report(name: &str, items: &[Fidelity], regions: RegionReport, meta: &MetricsMeta) -> MetricsReport {
    MetricsReport {
        method: name.into(),
        fidelity: FidelitySummary::of(items),
        regions,
        meta: meta.clone(),
    }
}

/// Plain-text comparison, one row per method, `mean ± std` columns.
pub fn table(report: &EvalReport) -> String {
    let mut out = format!("{} samples of the {:?} split\n", report.samples, report.split);
    let _ = writeln!(out, "{:<24} {:>18} {:>16} {:>16}", "method", "PSNR (dB)", "SSIM", "MI (nats)");
    for r in &report.methods {
        let f = &r.fidelity;
        let _ = writeln!(
            out,
            "{:<24} {:>18} {:>16} {:>16}",
            r.method,
            format!("{:.2} ± {:.2}", f.psnr.mean, f.psnr.std),
            f.ssim.to_string(),
            f.mi.to_string()
        );
    }
    let pairs: BTreeSet<&String> = report.methods.iter().flat_map(|r| r.regions.cnr.keys()).collect();
    let wires: BTreeSet<&String> = report.methods.iter().flat_map(|r| r.regions.lr.keys()).collect();
    let value = |v: Option<&f64>, digits: usize| v.map_or("-".to_string(), |v| format!("{v:.digits$}"));
    if !pairs.is_empty() {
        let _ = writeln!(out, "\n{:<24} {:>14} {:>10} {:>10}", "region", "method", "CR (dB)", "CNR (dB)");
        for k in &pairs {
            for r in &report.methods {
                let (cr, cnr) = (r.regions.cr.get(*k), r.regions.cnr.get(*k));
                let _ = writeln!(out, "{:<24} {:>14} {:>10} {:>10}", k, short(&r.method), value(cr, 2), value(cnr, 2));
            }
        }
    }
    if !wires.is_empty() {
        let _ = writeln!(out, "\n{:<24} {:>14} {:>10}", "wire", "method", "LR (mm)");
        for k in &wires {
            for r in &report.methods {
                let _ = writeln!(out, "{:<24} {:>14} {:>10}", k, short(&r.method), value(r.regions.lr.get(*k), 3));
            }
        }
    }
    out
}

fn short(name: &str) -> &str {
    &name[..name.len().min(14)]
}

/// One row per transmit count: CR and CNR of every region, then lateral
/// resolution of every wire (blank when unresolved).
pub fn sweep_csv(report: &EvalReport) -> String {
    let pairs: BTreeSet<&String> = report.sweep.iter().flat_map(|r| r.regions.cr.keys()).collect();
    let wires: BTreeSet<&String> = report.sweep.iter().flat_map(|r| r.regions.lr.keys()).collect();
    let mut out = String::from("transmits");
    for k in &pairs {
        let _ = write!(out, ",{k} cr_db,{k} cnr_db");
    }
    for k in &wires {
        let _ = write!(out, ",{k} lr_mm");
    }
    out.push('\n');
    let cell = |v: Option<&f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
    for row in &report.sweep {
        let _ = write!(out, "{}", row.transmits);
        for k in &pairs {
            let _ = write!(out, ",{},{}", cell(row.regions.cr.get(*k)), cell(row.regions.cnr.get(*k)));
        }
        for k in &wires {
            let _ = write!(out, ",{}", cell(row.regions.lr.get(*k)));
        }
        out.push('\n');
    }
    out
}
