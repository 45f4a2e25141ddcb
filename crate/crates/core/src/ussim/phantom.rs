use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::geometry::{PolarGrid, ProbeConfig};

/// A point reflector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scatterer {
    pub x: f64,
    pub z: f64,
    pub amplitude: f64,
}

/// Axis-aligned ellipse in Cartesian coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cx: f64,
    pub cz: f64,
    pub rx: f64,
    pub rz: f64,
}

impl Ellipse {
    pub fn circle(cx: f64, cz: f64, r: f64) -> Self {
        Self { cx, cz, rx: r, rz: r }
    }

    pub fn contains(&self, x: f64, z: f64) -> bool {
        ((x - self.cx) / self.rx).powi(2) + ((z - self.cz) / self.rz).powi(2) <= 1.0
    }
}

/// Annular sector with its apex at the origin.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub r_min: f64,
    pub r_max: f64,
    /// Half of the angular opening, radians.
    pub half_angle: f64,
}

impl Sector {
    pub fn contains(&self, x: f64, z: f64) -> bool {
        let r = x.hypot(z);
        r >= self.r_min && r <= self.r_max && x.atan2(z).abs() <= self.half_angle
    }

    pub fn area(&self) -> f64 {
        self.half_angle * (self.r_max * self.r_max - self.r_min * self.r_min)
    }

    /// Uniform sample over the sector area.
    pub fn sample(&self, rng: &mut impl Rng) -> (f64, f64) {
        let (a, b) = (self.r_min * self.r_min, self.r_max * self.r_max);
        let r = (a + rng.random::<f64>() * (b - a)).sqrt();
        let t = (2.0 * rng.random::<f64>() - 1.0) * self.half_angle;
        (r * t.sin(), r * t.cos())
    }
}

/// Numerical phantom: diffuse scatterers, anechoic regions and point targets.
///
/// Anechoic regions are already carved out of `diffuse`; they are kept for
/// ROI placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub sector: Sector,
    pub diffuse: Vec<Scatterer>,
    pub anechoic: Vec<Ellipse>,
    pub points: Vec<Scatterer>,
}

impl PhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let s = &self.sector;
        if !(s.r_min >= 0.0 && s.r_max > s.r_min && s.half_angle > 0.0 && s.half_angle < PI / 2.0) {
            return Err(Error::config("phantom sector is degenerate"));
        }
        for p in self.scatterers() {
            if !(p.x.is_finite() && p.z.is_finite() && p.amplitude.is_finite()) {
                return Err(Error::NonFinite(format!("phantom scatterer {p:?}")));
            }
        }
        for e in &self.anechoic {
            if !(e.rx > 0.0 && e.rz > 0.0) {
                return Err(Error::config("anechoic region radii must be positive"));
            }
        }
        Ok(())
    }

    pub fn scatterers(&self) -> impl Iterator<Item = &Scatterer> + '_ {
        self.diffuse.iter().chain(&self.points)
    }

    pub fn len(&self) -> usize {
        self.diffuse.len() + self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Reflection about the probe axis.
    pub fn mirrored(&self) -> Self {
        let flip = |s: &Scatterer| Scatterer { x: -s.x, ..*s };
        Self {
            sector: self.sector,
            diffuse: self.diffuse.iter().map(flip).collect(),
            anechoic: self.anechoic.iter().map(|e| Ellipse { cx: -e.cx, ..*e }).collect(),
            points: self.points.iter().map(flip).collect(),
        }
    }

    /// All amplitudes multiplied by `a`.
    pub fn scaled(&self, a: f64) -> Self {
        let scale = |s: &Scatterer| Scatterer {
            amplitude: s.amplitude * a,
            ..*s
        };
        Self {
            sector: self.sector,
            diffuse: self.diffuse.iter().map(scale).collect(),
            anechoic: self.anechoic.clone(),
            points: self.points.iter().map(scale).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhantomKind {
    /// Homogeneous speckle.
    Speckle,
    /// Speckle with two anechoic cysts on the axis.
    Cyst,
    /// Bright point targets on the axis over weak speckle.
    Wires,
    /// Random cysts, point targets and echogenicity changes.
    Mixed,
}

impl PhantomKind {
    pub const ALL: [PhantomKind; 4] = [Self::Speckle, Self::Cyst, Self::Wires, Self::Mixed];

    pub fn name(self) -> &'static str {
        match self {
            Self::Speckle => "speckle",
            Self::Cyst => "cyst",
            Self::Wires => "wires",
            Self::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown phantom kind '{s}'")))
    }
}

/// Parameters shared by the phantom generators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhantomOptions {
    pub sector: Sector,
    pub wavelength: f64,
    /// Diffuse scatterers per square wavelength.
    pub density: f64,
    /// Amplitude of point targets relative to the speckle standard deviation.
    pub point_amplitude: f64,
    /// Speckle amplitude in the wire phantom.
    pub wire_background: f64,
}

impl PhantomOptions {
    /// Sector matching `grid` (apex at the origin assumed), starting one
    /// millimeter below the probe to keep scatterers out of the near field.
    pub fn for_grid(grid: &PolarGrid, probe: &ProbeConfig) -> Self {
        Self {
            sector: Sector {
                r_min: grid.depth_start.max(1e-3),
                r_max: grid.depth_end,
                half_angle: grid.sector / 2.0,
            },
            wavelength: probe.wavelength(),
            density: 10.0,
            point_amplitude: 40.0,
            wire_background: 0.25,
        }
    }

    /// On-axis point-target depths, at 20, 40, 60, 80, 90 and 100 parts in 110
    /// of the imaging depth.
    pub fn wire_depths(&self) -> Vec<f64> {
        [20.0, 40.0, 60.0, 80.0, 90.0, 100.0]
            .iter()
            .map(|f| f / 110.0 * self.sector.r_max)
            .collect()
    }

    /// The two on-axis cysts of the cyst phantom: near (a third of the depth)
    /// and far (five sixths).
    pub fn cyst_regions(&self) -> [Ellipse; 2] {
        let d = self.sector.r_max;
        [Ellipse::circle(0.0, d / 3.0, 0.065 * d), Ellipse::circle(0.0, 5.0 * d / 6.0, 0.085 * d)]
    }
}

fn speckle(
    opts: &PhantomOptions,
    rng: &mut ChaCha8Rng,
    gain: impl Fn(f64, f64) -> f64,
    holes: &[Ellipse],
) -> Vec<Scatterer> {
    let count = (opts.density * opts.sector.area() / (opts.wavelength * opts.wavelength)).round() as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let (x, z) = opts.sector.sample(rng);
        let a: f64 = StandardNormal.sample(rng);
        if holes.iter().any(|e| e.contains(x, z)) {
            continue;
        }
        out.push(Scatterer {
            x,
            z,
            amplitude: a * gain(x, z),
        });
    }
    out
}

/// Builds a phantom of `kind`; the same seed always gives the same phantom.
pub fn make_phantom(kind: PhantomKind, opts: &PhantomOptions, seed: u64) -> Result<PhantomSpec> {
    if !(opts.density > 0.0 && opts.wavelength > 0.0) {
        return Err(Error::config("phantom density and wavelength must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sector = opts.sector;
    let on_axis = |z: f64, a: f64| Scatterer { x: 0.0, z, amplitude: a };
    let spec = match kind {
        PhantomKind::Speckle => PhantomSpec {
            sector,
            diffuse: speckle(opts, &mut rng, |_, _| 1.0, &[]),
            anechoic: vec![],
            points: vec![],
        },
        PhantomKind::Cyst => {
            let holes = opts.cyst_regions().to_vec();
            PhantomSpec {
                sector,
                diffuse: speckle(opts, &mut rng, |_, _| 1.0, &holes),
                anechoic: holes,
                points: vec![],
            }
        }
        PhantomKind::Wires => {
            let bg = opts.wire_background;
            PhantomSpec {
                sector,
                diffuse: speckle(opts, &mut rng, |_, _| bg, &[]),
                anechoic: vec![],
                points: opts
                    .wire_depths()
                    .into_iter()
                    .map(|z| on_axis(z, opts.point_amplitude))
                    .collect(),
            }
        }
        PhantomKind::Mixed => mixed(opts, &mut rng),
    };
    spec.validate()?;
    Ok(spec)
}

struct Blob {
    x: f64,
    z: f64,
    radius: f64,
    gain: f64,
}

fn mixed(opts: &PhantomOptions, rng: &mut ChaCha8Rng) -> PhantomSpec {
    let sector = opts.sector;
    let depth = sector.r_max;
    // keep features clear of the sector edges so they are fully imaged
    let inner = Sector {
        r_min: sector.r_min.max(0.1 * depth),
        r_max: 0.92 * depth,
        half_angle: 0.8 * sector.half_angle,
    };

    let blobs: Vec<Blob> = (0..rng.random_range(0..=3))
        .map(|_| {
            let (x, z) = inner.sample(rng);
            Blob {
                x,
                z,
                radius: rng.random_range(0.05..0.15) * depth,
                gain: 10f64.powf(rng.random_range(-0.5..0.5)),
            }
        })
        .collect();

    let mut holes = Vec::new();
    for _ in 0..rng.random_range(0..=3) {
        let (cx, cz) = inner.sample(rng);
        let r = rng.random_range(0.03..0.1) * depth;
        let aspect = rng.random_range(0.7..1.4);
        holes.push(Ellipse {
            cx,
            cz,
            rx: r * aspect,
            rz: r / aspect,
        });
    }

    let points = (0..rng.random_range(0..=6))
        .map(|_| {
            let (x, z) = inner.sample(rng);
            Scatterer {
                x,
                z,
                amplitude: opts.point_amplitude * rng.random_range(0.3..1.5),
            }
        })
        .collect();

    let background = rng.random_range(0.25..1.0);
    let gain = |x: f64, z: f64| {
        blobs.iter().fold(background, |g, b| {
            let d2 = (x - b.x).powi(2) + (z - b.z).powi(2);
            g * (1.0 + (b.gain - 1.0) * (-0.5 * d2 / (b.radius * b.radius)).exp())
        })
    };
    PhantomSpec {
        sector,
        diffuse: speckle(opts, rng, gain, &holes),
        anechoic: holes,
        points,
    }
}
