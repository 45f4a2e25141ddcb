use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use dwrecon_core::analysis::{activation_map, depth_contribution, Attribution};
use serde::Serialize;

use crate::files::{create_dir, load_checkpoint, read_stack, write_json};
use crate::render::{palette_color, save_indexed};
use crate::user_error;

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Network input `[m, h, w]`.
    #[arg(long)]
    pub input: PathBuf,
    /// Directory receiving `activation_map.png`, `legend.json` and `depth_contribution.csv`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "activation", value_parser = parse_attribution)]
    pub attribution: Attribution,
}

fn parse_attribution(s: &str) -> Result<Attribution, String> {
    s.parse().map_err(|e: dwrecon_core::Error| e.to_string())
}

#[derive(Serialize)]
struct LegendEntry {
    label: usize,
    kernel: [usize; 2],
    color: [u8; 3],
    /// Percent of all pixels carrying this label.
    share: f64,
}

#[derive(Serialize)]
struct Legend {
    attribution: Attribution,
    height: usize,
    width: usize,
    paths: Vec<LegendEntry>,
}

pub fn run(args: AnalyzeArgs) -> Result<()> {
    let net = load_checkpoint(&args.checkpoint)?;
    let x = read_stack(&args.input, &[])?;
    if x.count() != net.config.input_channels {
        return Err(user_error!(
            "the network takes {} transmits but {} holds {}",
            net.config.input_channels,
            args.input.display(),
            x.count()
        ));
    }
    let map = activation_map(&net, &x, args.attribution)?;
    let depth = depth_contribution(&map);
    create_dir(&args.out)?;
    save_indexed(&map.labels, map.height, map.width, map.legend.len(), &args.out.join("activation_map.png"))?;
    let total = map.labels.len() as f64;
    let legend = Legend {
        attribution: args.attribution,
        height: map.height,
        width: map.width,
        paths: map
            .legend
            .iter()
            .enumerate()
            .map(|(label, &kernel)| LegendEntry {
                label,
                kernel,
                color: palette_color(label),
                share: 100.0 * map.labels.iter().filter(|&&l| l as usize == label).count() as f64 / total,
            })
            .collect(),
    };
    write_json(&args.out.join("legend.json"), &legend)?;
    std::fs::write(args.out.join("depth_contribution.csv"), depth.to_csv()).context("writing depth_contribution.csv")?;
    for e in &legend.paths {
        println!("{}x{} path: {:.1}% of pixels", e.kernel[0], e.kernel[1], e.share);
    }
    Ok(())
}
