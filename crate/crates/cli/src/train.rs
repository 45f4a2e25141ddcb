use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use dwrecon_core::io::{manifest_root, Manifest};
use dwrecon_core::model::{self, builtin_config, Checkpoint};
use dwrecon_core::trainer::{train_from, Dataset, TrainConfig};
use dwrecon_core::{Element, Error as CoreError};
use log::{info, warn};

use crate::files::read_json;
use crate::{user_error, ModelArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint written with the best validation weights.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Training settings as JSON (defaults otherwise); the flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Continue from this checkpoint; its architecture replaces `--model`.
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// JSON-lines epoch log (defaults to the checkpoint path with `.log.jsonl`).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
}

fn train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg: TrainConfig = match &args.config {
        Some(p) => read_json(p, "training config")?,
        None => TrainConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.max_epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.initial_lr = lr;
    }
    if let Some(b) = args.batch_size {
        cfg.batch_size = b;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn log_path(args: &TrainArgs) -> PathBuf {
    args.log.clone().unwrap_or_else(|| sibling(&args.out, ".log.jsonl"))
}

pub fn run(args: TrainArgs) -> Result<()> {
    let cfg = train_config(&args)?;
    let manifest = Manifest::load(&args.manifest)?;
    let data = manifest.load_dataset(&manifest_root(&args.manifest))?;
    if data.split.train.is_empty() || data.split.val.is_empty() {
        return Err(user_error!("the manifest needs train and validation samples"));
    }
    match args.precision {
        Precision::F32 => train_as::<f32>(&args, &cfg, &data),
        Precision::F64 => train_as::<f64>(&args, &cfg, &data),
    }
}

fn train_as<T: Element>(args: &TrainArgs, cfg: &TrainConfig, data: &Dataset) -> Result<()> {
    let ckpt: Checkpoint<T> = match &args.resume {
        Some(p) => {
            let ckpt = model::load::<T>(p).with_context(|| format!("loading {}", p.display()))?;
            info!("resuming '{}' at epoch {}", ckpt.config.name, ckpt.meta.epoch);
            ckpt
        }
        None => {
            let config = builtin_config(args.model.model, args.model.scale)?.with_input_channels(data.input_channels());
            info!(
                "training '{}' at scale {} ({} parameters)",
                config.name,
                args.model.scale,
                config.param_count()?
            );
            model::build::<T>(&config, cfg.seed)?
        }
    };
    if ckpt.meta.epoch >= cfg.max_epochs {
        warn!("checkpoint is already at epoch {}, nothing to do", ckpt.meta.epoch);
    }

    let log_path = log_path(args);
    let file = OpenOptions::new()
        .create(true)
        .write(true)
        .append(args.resume.is_some())
        .truncate(args.resume.is_none())
        .open(&log_path)
        .with_context(|| format!("opening log {}", log_path.display()))?;
    let mut log = BufWriter::new(file);
    let mut log_error = None;
    let outcome = train_from(ckpt, data, cfg, &mut |record| {
        let line = serde_json::to_string(record).expect("record serializes");
        if let Err(e) = writeln!(log, "{line}").and_then(|_| log.flush()) {
            log_error.get_or_insert(e);
        }
    });
    if let Some(e) = log_error {
        return Err(e).context("writing the training log");
    }
    let outcome = match outcome {
        Ok(o) => o,
        Err(CoreError::Diverged { epoch, checkpoint }) => {
            if let Some(bytes) = checkpoint {
                let path = sibling(&args.out, ".diverged");
                std::fs::write(&path, bytes)?;
                warn!("saved the last good weights to {}", path.display());
            }
            anyhow::bail!("training diverged at epoch {epoch}");
        }
        Err(e) => return Err(e.into()),
    };
    model::save(&outcome.best, &args.out)?;
    let best = outcome.best.meta.best_val_loss.unwrap_or(f64::NAN);
    println!(
        "trained {} epochs{}; best validation loss {best:.4e}; wrote {}",
        outcome.log.len(),
        if outcome.stopped_early { " (stopped early)" } else { "" },
        args.out.display()
    );
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}
