use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use dwrecon_core::io::write_tensor;
use dwrecon_core::recon::{compound, reconstruct};
use dwrecon_core::ussim::spread_subset;
use dwrecon_core::RfImage;
use log::warn;

use crate::files::{acquisition_config, load_checkpoint, read_stack};
use crate::render::{bmode_panel, save_panels};
use crate::user_error;

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    /// Trained network (not needed with `--compound`).
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Network input `[m, h, w]`, or a full stack of every transmit.
    #[arg(long)]
    pub input: PathBuf,
    /// Reference image for the third panel when `--input` holds only the network input.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub out_png: PathBuf,
    /// Writes the reconstructed (or compounded) RF image as a tensor file.
    #[arg(long)]
    pub out_rf: Option<PathBuf>,
    /// Render the compound of this many evenly spread transmits of the input instead.
    #[arg(long)]
    pub compound: Option<usize>,
    /// Acquisition settings whose grid drives scan conversion.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Keep the polar grid instead of scan converting.
    #[arg(long)]
    pub polar: bool,
    #[arg(long, default_value_t = 50.0)]
    pub dynamic_range: f64,
    /// Panel width in pixels after scan conversion.
    #[arg(long, default_value_t = 256)]
    pub width: usize,
}

pub fn run(args: ReconstructArgs) -> Result<()> {
    let config = acquisition_config(args.config.as_deref())?;
    let grid = (!args.polar).then_some(&config.grid);
    let stack = read_stack(&args.input, &config.sequence.angles)?;
    let n = stack.count();
    let panel = |rf: &RfImage| bmode_panel(rf, grid, args.dynamic_range, args.width);

    if let Some(k) = args.compound {
        if k == 0 || k > n {
            return Err(user_error!("--compound {k} needs between 1 and {n} transmits in the input"));
        }
        let img = compound(&stack, &spread_subset(n, k)?)?;
        if let Some(p) = &args.out_rf {
            write_tensor(p, &img.data)?;
        }
        save_panels(&[panel(&img)?], &args.out_png)?;
        println!("wrote the {k}-transmit compound to {}", args.out_png.display());
        return Ok(());
    }

    let path = args
        .checkpoint
        .as_ref()
        .ok_or_else(|| user_error!("--checkpoint is required unless --compound is given"))?;
    let net = load_checkpoint(path)?;
    let m = net.config.input_channels;
    // a full stack supplies both the network input and the reference
    let (x, reference) = if n == m {
        let reference = match &args.reference {
            Some(p) => Some(read_stack(p, &[])?),
            None => None,
        };
        (stack, reference.map(|r| r.image(0)))
    } else if n > m {
        let all: Vec<usize> = (0..n).collect();
        (stack.subset(&spread_subset(n, m)?)?, Some(compound(&stack, &all)?))
    } else {
        return Err(user_error!("the network takes {m} transmits but {} holds {n}", args.input.display()));
    };
    let inputs: Vec<usize> = (0..m).collect();
    let out = reconstruct(&net, &x)?;
    if let Some(p) = &args.out_rf {
        write_tensor(p, &out.data)?;
    }
    let mut panels = vec![panel(&compound(&x, &inputs)?)?, panel(&out)?];
    match &reference {
        Some(r) => panels.push(panel(r)?),
        None => warn!("no reference given; writing two panels"),
    }
    save_panels(&panels, &args.out_png)?;
    println!("wrote {} panels to {}", panels.len(), args.out_png.display());
    Ok(())
}
