use log::warn;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::geometry::{ProbeConfig, SequenceConfig};
use super::phantom::PhantomSpec;

/// Fractional-delay resolution of the precomputed pulse table.
const PULSE_PHASES: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// Apply 1/r spreading on the transmit and receive paths.
    pub spreading: bool,
    /// Standard deviation of additive white noise on the channel data (0 disables it).
    pub noise_std: f64,
    pub noise_seed: u64,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            spreading: true,
            noise_std: 0.0,
            noise_seed: 0,
        }
    }
}

/// Per-element RF traces for every transmit of a sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelData {
    /// One `[elements, samples]` tensor per transmit.
    pub transmits: Vec<Tensor<f64>>,
    /// Number of samples recorded before time zero, so that arrivals ahead
    /// of the virtual wavefront reference still land in the window.
    pub lead: usize,
    /// Scatterer echoes (summed over transmits and elements) that fell
    /// entirely outside the recording window.
    pub skipped: usize,
}

impl ChannelData {
    pub fn samples(&self) -> usize {
        self.transmits[0].dims()[1]
    }
}

/// `pulse(k - half - q / PULSE_PHASES)` for every phase `q` and tap `k`.
struct PulseTable {
    half: usize,
    taps: usize,
    values: Vec<f64>,
}

impl PulseTable {
    fn new(probe: &ProbeConfig) -> Self {
        let half = probe.pulse_half_samples();
        let taps = 2 * half + 1;
        let dt = 1.0 / probe.sampling_frequency;
        let mut values = Vec::with_capacity(PULSE_PHASES * taps);
        for q in 0..PULSE_PHASES {
            let frac = q as f64 / PULSE_PHASES as f64;
            for k in 0..taps {
                values.push(probe.pulse((k as f64 - half as f64 - frac) * dt));
            }
        }
        Self { half, taps, values }
    }

    /// Start sample and tap row for an arrival at fractional sample `pos`.
    fn locate(&self, pos: f64) -> (isize, &[f64]) {
        let mut n0 = pos.floor();
        let mut q = ((pos - n0) * PULSE_PHASES as f64).round() as usize;
        if q == PULSE_PHASES {
            q = 0;
            n0 += 1.0;
        }
        (
            n0 as isize - self.half as isize,
            &self.values[q * self.taps..(q + 1) * self.taps],
        )
    }
}

/// Recording window that holds every echo from within `max_range` of the apex.
pub fn record_layout(probe: &ProbeConfig, max_range: f64) -> (usize, usize) {
    let half = probe.pulse_half_samples();
    let per_meter = probe.sampling_frequency / probe.speed_of_sound;
    let lead = (probe.aperture() / 2.0 * per_meter).ceil() as usize + half + 1;
    let span = ((2.0 * max_range + probe.aperture() / 2.0) * per_meter).ceil() as usize;
    (lead, lead + span + half + 2)
}

/// Synthesizes channel data for every transmit of `sequence`.
///
/// Each echo is the pulse delayed by the virtual-source-to-scatterer path
/// (measured relative to the source's distance from the apex) plus the
/// scatterer-to-element path.
pub fn simulate_rf(
    phantom: &PhantomSpec,
    probe: &ProbeConfig,
    sequence: &SequenceConfig,
    opts: &SimOptions,
) -> Result<ChannelData> {
    probe.validate()?;
    sequence.validate()?;
    phantom.validate()?;
    if !(opts.noise_std >= 0.0 && opts.noise_std.is_finite()) {
        return Err(Error::config("noise standard deviation must be non-negative"));
    }

    let table = PulseTable::new(probe);
    let (lead, samples) = record_layout(probe, phantom.sector.r_max);
    let elements = probe.element_positions();
    let per_meter = probe.sampling_frequency / probe.speed_of_sound;
    let floor = probe.wavelength();
    let scatterers: Vec<_> = phantom.scatterers().copied().collect();

    // receive path lengths (in samples) and spreading factors, shared by all transmits
    let n_el = elements.len();
    let mut rx_delay = Vec::with_capacity(scatterers.len() * n_el);
    let mut rx_gain = Vec::with_capacity(scatterers.len() * n_el);
    for s in &scatterers {
        for &ex in &elements {
            let d = (s.x - ex).hypot(s.z);
            rx_delay.push(d * per_meter);
            rx_gain.push(if opts.spreading { 1.0 / d.max(floor) } else { 1.0 });
        }
    }

    let results: Vec<(Tensor<f64>, usize)> = (0..sequence.len())
        .into_par_iter()
        .map(|t| {
            let (sx, sz) = sequence.virtual_source(t);
            let r0 = sequence.virtual_source_distance;
            let mut buf = vec![0.0f64; n_el * samples];
            let mut skipped = 0;
            for (si, s) in scatterers.iter().enumerate() {
                let d_tx = (s.x - sx).hypot(s.z - sz);
                let tx_delay = (d_tx - r0) * per_meter + lead as f64;
                let mut amp = s.amplitude;
                if opts.spreading {
                    amp /= d_tx.max(floor);
                }
                let row = si * n_el;
                for e in 0..n_el {
                    let (start, taps) = table.locate(tx_delay + rx_delay[row + e]);
                    let a = amp * rx_gain[row + e];
                    let lo = start.max(0);
                    let hi = (start + taps.len() as isize).min(samples as isize);
                    if lo >= hi {
                        skipped += 1;
                        continue;
                    }
                    let out = &mut buf[e * samples + lo as usize..e * samples + hi as usize];
                    let taps = &taps[(lo - start) as usize..(hi - start) as usize];
                    for (o, &p) in out.iter_mut().zip(taps) {
                        *o += a * p;
                    }
                }
            }
            if opts.noise_std > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(opts.noise_seed.wrapping_add(t as u64));
                let normal = Normal::new(0.0, opts.noise_std).expect("valid std");
                for v in &mut buf {
                    *v += normal.sample(&mut rng);
                }
            }
            (Tensor::from_vec(&[n_el, samples], buf).expect("dims"), skipped)
        })
        .collect();

    let skipped = results.iter().map(|r| r.1).sum();
    if skipped > 0 {
        warn!("{skipped} echoes fell outside the recording window and were skipped");
    }
    Ok(ChannelData {
        transmits: results.into_iter().map(|r| r.0).collect(),
        lead,
        skipped,
    })
}
