//! Diverging-wave acquisition simulator and delay-and-sum beamformer.

mod beamform;
mod geometry;
mod phantom;
mod rf;
mod simulate;

pub use beamform::{das_beamform, Beamformer, DasOptions};
pub use geometry::{spread_subset, PolarGrid, ProbeConfig, SequenceConfig};
pub use phantom::{make_phantom, Ellipse, PhantomKind, PhantomOptions, PhantomSpec, Scatterer, Sector};
pub use rf::{RfImage, RfStack};
pub use simulate::{record_layout, simulate_rf, ChannelData, SimOptions};

use log::warn;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::recon::compound;

/// Everything needed to turn a phantom into beamformed images.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    pub probe: ProbeConfig,
    pub sequence: SequenceConfig,
    pub grid: PolarGrid,
    #[serde(default)]
    pub sim: SimOptions,
    #[serde(default)]
    pub das: DasOptions,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl AcquisitionConfig {
    /// 64-element probe, 31 transmits, 128 × 64 grid over 55 mm.
    pub fn desk() -> Self {
        let probe = ProbeConfig::default();
        let grid = PolarGrid::desk();
        Self {
            sequence: SequenceConfig::diverging(&probe, grid.sector),
            probe,
            grid,
            sim: SimOptions::default(),
            das: DasOptions::default(),
        }
    }

    /// Same acquisition on the 512 × 256 grid over 11 cm.
    pub fn full() -> Self {
        Self {
            grid: PolarGrid::full(),
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.probe.validate()?;
        self.sequence.validate()?;
        self.grid.validate()
    }

    pub fn phantom_options(&self) -> PhantomOptions {
        PhantomOptions::for_grid(&self.grid, &self.probe)
    }

    /// Copy whose channel noise is drawn from a stream specific to `phantom_seed`,
    /// so samples of one dataset never share a noise realization.
    pub fn for_phantom_seed(&self, phantom_seed: u64) -> Self {
        let mut out = self.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.sim.noise_seed ^ phantom_seed.rotate_left(17));
        out.sim.noise_seed = rng.next_u64();
        out
    }
}

/// Beamformed images of every transmit for one phantom.
#[derive(Clone, Debug, PartialEq)]
pub struct Acquisition {
    pub stack: RfStack,
    /// Echoes outside the recording window during simulation.
    pub skipped_echoes: usize,
    /// Pixels whose delays left the recording window, over all transmits.
    pub clipped_pixels: usize,
}

/// One training pair: the input subset and the all-transmit compound.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub x: RfStack,
    pub y: RfImage,
}

/// Simulates and beamforms every transmit of `config.sequence`.
pub fn acquire(phantom: &PhantomSpec, config: &AcquisitionConfig) -> Result<Acquisition> {
    config.validate()?;
    let data = simulate_rf(phantom, &config.probe, &config.sequence, &config.sim)?;
    let bf = Beamformer::new(&config.probe, &config.grid, &config.das)?;
    let mut images = Vec::with_capacity(config.sequence.len());
    let mut clipped = 0;
    for i in 0..config.sequence.len() {
        let (img, c) = bf.beamform(&data, &config.sequence, i)?;
        images.push(img);
        clipped += c;
    }
    if clipped > 0 {
        warn!("{clipped} beamformed pixels fell outside the recording window and were zeroed");
    }
    Ok(Acquisition {
        stack: RfStack::from_images(&images, config.sequence.angles.clone())?,
        skipped_echoes: data.skipped,
        clipped_pixels: clipped,
    })
}

impl Acquisition {
    /// Input subset (stacked in `input_angles` order) and the mean of all transmits.
    pub fn sample(&self, sequence: &SequenceConfig) -> Result<Sample> {
        let all: Vec<usize> = (0..self.stack.count()).collect();
        Ok(Sample {
            x: self.stack.subset(&sequence.input_indices()?)?,
            y: compound(&self.stack, &all)?,
        })
    }
}

/// Simulates one phantom and returns the `(X, Y)` pair.
pub fn acquire_sample(phantom: &PhantomSpec, config: &AcquisitionConfig) -> Result<Sample> {
    acquire(phantom, config)?.sample(&config.sequence)
}

/// Per-sample phantom seeds derived from one dataset seed.
pub fn sample_seeds(seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| rng.next_u64()).collect()
}

/// Simulates `count` samples of phantom `kind`, one phantom per seed from
/// [`sample_seeds`]. `progress` is called with the number finished so far.
pub fn simulate_samples(
    config: &AcquisitionConfig,
    kind: PhantomKind,
    count: usize,
    seed: u64,
    progress: &(dyn Fn(usize) + Sync),
) -> Result<Vec<(u64, Sample)>> {
    config.validate()?;
    let opts = config.phantom_options();
    let done = std::sync::atomic::AtomicUsize::new(0);
    sample_seeds(seed, count)
        .into_par_iter()
        .map(|s| {
            let phantom = make_phantom(kind, &opts, s)?;
            let sample = acquire_sample(&phantom, &config.for_phantom_seed(s))?;
            progress(done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1);
            Ok((s, sample))
        })
        .collect()
}
