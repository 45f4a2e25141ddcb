use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phased-array probe and pulse parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub element_count: usize,
    /// Element spacing in meters.
    pub pitch: f64,
    /// Hz
    pub center_frequency: f64,
    /// -6 dB bandwidth over center frequency; descriptive, the pulse shape is
    /// set by `pulse_cycles`.
    pub fractional_bandwidth: f64,
    /// Full width at half maximum of the Gaussian pulse envelope, in carrier cycles.
    pub pulse_cycles: f64,
    /// Hz
    pub sampling_frequency: f64,
    /// m/s
    pub speed_of_sound: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            element_count: 64,
            pitch: 0.3e-3,
            center_frequency: 3e6,
            fractional_bandwidth: 2.0 / 3.0,
            pulse_cycles: 1.5,
            sampling_frequency: 12e6,
            speed_of_sound: 1540.0,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("pitch", self.pitch),
            ("center_frequency", self.center_frequency),
            ("fractional_bandwidth", self.fractional_bandwidth),
            ("pulse_cycles", self.pulse_cycles),
            ("sampling_frequency", self.sampling_frequency),
            ("speed_of_sound", self.speed_of_sound),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("probe {name} must be positive, got {v}")));
            }
        }
        if self.element_count == 0 {
            return Err(Error::config("probe needs at least one element"));
        }
        if self.sampling_frequency <= 2.0 * self.center_frequency {
            return Err(Error::config(format!(
                "sampling frequency {} Hz does not exceed twice the center frequency {} Hz",
                self.sampling_frequency, self.center_frequency
            )));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_sound / self.center_frequency
    }

    pub fn aperture(&self) -> f64 {
        self.element_count as f64 * self.pitch
    }

    /// Lateral element position; element `i` and `n - 1 - i` are exact mirrors.
    pub fn element_x(&self, i: usize) -> f64 {
        (2.0 * i as f64 - (self.element_count as f64 - 1.0)) * self.pitch / 2.0
    }

    pub fn element_positions(&self) -> Vec<f64> {
        (0..self.element_count).map(|i| self.element_x(i)).collect()
    }

    /// Standard deviation of the Gaussian pulse envelope in seconds.
    pub fn pulse_sigma(&self) -> f64 {
        let fwhm = self.pulse_cycles / self.center_frequency;
        fwhm / (8.0 * 2f64.ln()).sqrt()
    }

    /// Gaussian-windowed cosine centered on `t = 0`.
    pub fn pulse(&self, t: f64) -> f64 {
        let s = self.pulse_sigma();
        (-0.5 * (t / s).powi(2)).exp() * (2.0 * PI * self.center_frequency * t).cos()
    }

    /// Half-length of the truncated pulse in samples (three standard deviations).
    pub fn pulse_half_samples(&self) -> usize {
        (3.0 * self.pulse_sigma() * self.sampling_frequency).ceil() as usize
    }
}

/// Steered diverging-wave transmit sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceConfig {
    /// Steering angles in radians, in transmit order.
    pub angles: Vec<f64>,
    /// Distance of the virtual sources behind the array center, in meters.
    pub virtual_source_distance: f64,
    /// Angles (radians) forming the low-quality network input, in stack order.
    pub input_angles: Vec<f64>,
}

impl SequenceConfig {
    /// 31 transmits from -30° to +30° in 2° steps; input subset -30°, 0°, +30°.
    ///
    /// The virtual sources sit on a circle whose radius makes the unsteered
    /// wave span `sector` across the probe aperture.
    pub fn diverging(probe: &ProbeConfig, sector: f64) -> Self {
        Self::from_degrees(
            &(0..31).map(|i| -30.0 + 2.0 * i as f64).collect::<Vec<_>>(),
            &[-30.0, 0.0, 30.0],
            probe.aperture() / 2.0 / (sector / 2.0).tan(),
        )
    }

    pub fn from_degrees(angles: &[f64], inputs: &[f64], virtual_source_distance: f64) -> Self {
        Self {
            angles: angles.iter().map(|a| a.to_radians()).collect(),
            virtual_source_distance,
            input_angles: inputs.iter().map(|a| a.to_radians()).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles.is_empty() {
            return Err(Error::config("sequence has no transmits"));
        }
        if let Some(a) = self.angles.iter().find(|a| !(a.abs() < PI / 2.0)) {
            return Err(Error::config(format!("steering angle {a} rad outside ±π/2")));
        }
        if !(self.virtual_source_distance.is_finite() && self.virtual_source_distance > 0.0) {
            return Err(Error::config("virtual source distance must be positive"));
        }
        self.input_indices()?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// Virtual source `(x, z)` of transmit `index`.
    pub fn virtual_source(&self, index: usize) -> (f64, f64) {
        let a = self.angles[index];
        let r = self.virtual_source_distance;
        (-r * a.sin(), -r * a.cos())
    }

    /// Positions of `input_angles` within `angles`.
    pub fn input_indices(&self) -> Result<Vec<usize>> {
        self.input_angles
            .iter()
            .map(|&target| {
                self.angles
                    .iter()
                    .position(|&a| (a - target).abs() < 1e-9)
                    .ok_or_else(|| {
                        Error::config(format!(
                            "input angle {:.3}° is not in the transmit sequence",
                            target.to_degrees()
                        ))
                    })
            })
            .collect()
    }

    /// Evenly spread subset of `count` transmits (used for compounding sweeps).
    pub fn spread_indices(&self, count: usize) -> Result<Vec<usize>> {
        spread_subset(self.angles.len(), count)
    }

    /// Same transmits steered the other way.
    pub fn mirrored(&self) -> Self {
        Self {
            angles: self.angles.iter().map(|a| -a).collect(),
            virtual_source_distance: self.virtual_source_distance,
            input_angles: self.input_angles.iter().map(|a| -a).collect(),
        }
    }
}

/// Beamforming grid in (depth, angle) coordinates about an apex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolarGrid {
    /// Samples along each line (`h`).
    pub depth_samples: usize,
    /// Number of lines (`w`).
    pub lines: usize,
    /// Radial range in meters.
    pub depth_start: f64,
    pub depth_end: f64,
    /// Total angular opening in radians.
    pub sector: f64,
    pub apex: (f64, f64),
}

impl Default for PolarGrid {
    fn default() -> Self {
        Self::desk()
    }
}

impl PolarGrid {
    /// 128 × 64 over 55 mm × 90°.
    pub fn desk() -> Self {
        Self {
            depth_samples: 128,
            lines: 64,
            depth_start: 0.0,
            depth_end: 0.055,
            sector: PI / 2.0,
            apex: (0.0, 0.0),
        }
    }

    /// 512 × 256 over 11 cm × 90°.
    pub fn full() -> Self {
        Self {
            depth_samples: 512,
            lines: 256,
            depth_start: 0.0,
            depth_end: 0.11,
            sector: PI / 2.0,
            apex: (0.0, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth_samples < 2 || self.lines < 2 {
            return Err(Error::config(format!(
                "grid needs at least 2 × 2 samples, got {} × {}",
                self.depth_samples, self.lines
            )));
        }
        if !(self.depth_start >= 0.0 && self.depth_end > self.depth_start) {
            return Err(Error::config("grid depth range must be increasing and non-negative"));
        }
        if !(self.sector > 0.0 && self.sector < PI) {
            return Err(Error::config("grid sector must lie in (0, π)"));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.depth_samples, self.lines)
    }

    pub fn depth_step(&self) -> f64 {
        (self.depth_end - self.depth_start) / (self.depth_samples - 1) as f64
    }

    pub fn angle_step(&self) -> f64 {
        self.sector / (self.lines - 1) as f64
    }

    pub fn radius(&self, row: usize) -> f64 {
        self.depth_start + row as f64 * self.depth_step()
    }

    /// Line angle; lines `j` and `w - 1 - j` are exact mirrors.
    pub fn angle(&self, col: usize) -> f64 {
        (2.0 * col as f64 - (self.lines as f64 - 1.0)) * self.angle_step() / 2.0
    }

    /// Cartesian `(x, z)` of a grid sample.
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        let (r, a) = (self.radius(row), self.angle(col));
        (self.apex.0 + r * a.sin(), self.apex.1 + r * a.cos())
    }

    /// Fractional `(row, col)` of a Cartesian point, which may fall outside the grid.
    pub fn locate(&self, x: f64, z: f64) -> (f64, f64) {
        let (dx, dz) = (x - self.apex.0, z - self.apex.1);
        let r = (dx * dx + dz * dz).sqrt();
        let a = dx.atan2(dz);
        (
            (r - self.depth_start) / self.depth_step(),
            (a + self.sector / 2.0) / self.angle_step(),
        )
    }
}

/// `count` indices spread evenly over `0..n`. One index picks the center;
/// otherwise both ends are included.
pub fn spread_subset(n: usize, count: usize) -> Result<Vec<usize>> {
    if count == 0 || count > n {
        return Err(Error::invalid(format!("cannot pick {count} of {n} transmits")));
    }
    if count == 1 {
        return Ok(vec![n / 2]);
    }
    Ok((0..count)
        .map(|i| ((i * (n - 1)) as f64 / (count - 1) as f64).round() as usize)
        .collect())
}
