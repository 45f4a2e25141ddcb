use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::geometry::{PolarGrid, ProbeConfig, SequenceConfig};
use super::rf::RfImage;
use super::simulate::ChannelData;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DasOptions {
    /// Undo the two-way 1/r spreading so that deep and shallow scatterers of
    /// equal strength beamform to similar amplitudes.
    pub depth_gain: bool,
}

impl Default for DasOptions {
    fn default() -> Self {
        Self { depth_gain: true }
    }
}

/// Delay-and-sum beamformer with receive delays cached for one probe and grid.
pub struct Beamformer {
    probe: ProbeConfig,
    grid: PolarGrid,
    opts: DasOptions,
    /// Receive path per (pixel, element), in samples.
    rx_delay: Vec<f64>,
}

impl Beamformer {
    pub fn new(probe: &ProbeConfig, grid: &PolarGrid, opts: &DasOptions) -> Result<Self> {
        probe.validate()?;
        grid.validate()?;
        let per_meter = probe.sampling_frequency / probe.speed_of_sound;
        let elements = probe.element_positions();
        let (h, w) = grid.dims();
        let mut rx_delay = Vec::with_capacity(h * w * elements.len());
        for row in 0..h {
            for col in 0..w {
                let (x, z) = grid.position(row, col);
                rx_delay.extend(elements.iter().map(|&ex| (x - ex).hypot(z) * per_meter));
            }
        }
        Ok(Self {
            probe: probe.clone(),
            grid: grid.clone(),
            opts: opts.clone(),
            rx_delay,
        })
    }

    /// Beamforms transmit `index` of `data`. Returns the image and the number
    /// of pixels whose delays left the recorded window (those pixels are 0).
    pub fn beamform(&self, data: &ChannelData, sequence: &SequenceConfig, index: usize) -> Result<(RfImage, usize)> {
        let channel = data
            .transmits
            .get(index)
            .ok_or_else(|| Error::invalid(format!("transmit {index} not in channel data")))?;
        let n_el = self.probe.element_count;
        let [rows, samples] = [channel.dims()[0], channel.dims()[1]];
        if rows != n_el {
            return Err(Error::shape(format!("channel data has {rows} elements, probe has {n_el}")));
        }
        if index >= sequence.len() {
            return Err(Error::invalid(format!("transmit {index} not in sequence")));
        }
        let per_meter = self.probe.sampling_frequency / self.probe.speed_of_sound;
        let floor = self.probe.wavelength();
        let (sx, sz) = sequence.virtual_source(index);
        let r0 = sequence.virtual_source_distance;
        let (h, w) = self.grid.dims();
        let trace = channel.data();
        let mut out = vec![0.0; h * w];
        let mut clipped = 0;
        for row in 0..h {
            let r = self.grid.radius(row);
            for col in 0..w {
                let pix = row * w + col;
                let (x, z) = self.grid.position(row, col);
                let d_tx = (x - sx).hypot(z - sz);
                let tx = (d_tx - r0) * per_meter + data.lead as f64;
                let delays = &self.rx_delay[pix * n_el..(pix + 1) * n_el];
                let mut acc = 0.0;
                let mut inside = true;
                for (e, &rx) in delays.iter().enumerate() {
                    let pos = tx + rx;
                    let i0 = pos.floor();
                    if i0 < 0.0 || i0 as usize + 1 >= samples {
                        inside = false;
                        break;
                    }
                    let (i0, f) = (i0 as usize, pos - i0);
                    let t = &trace[e * samples + i0..e * samples + i0 + 2];
                    acc += t[0] + f * (t[1] - t[0]);
                }
                if !inside {
                    clipped += 1;
                    continue;
                }
                if self.opts.depth_gain {
                    acc *= d_tx.max(floor) * r.max(floor) / n_el as f64;
                }
                out[pix] = acc;
            }
        }
        Ok((RfImage::new(Tensor::from_vec(&[h, w], out)?)?, clipped))
    }
}

/// One-shot delay-and-sum of transmit `index`.
pub fn das_beamform(
    data: &ChannelData,
    probe: &ProbeConfig,
    sequence: &SequenceConfig,
    index: usize,
    grid: &PolarGrid,
    opts: &DasOptions,
) -> Result<(RfImage, usize)> {
    Beamformer::new(probe, grid, opts)?.beamform(data, sequence, index)
}
