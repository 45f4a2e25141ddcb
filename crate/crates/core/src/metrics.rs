//! Image-quality metrics: PSNR, SSIM, mutual information, contrast (CR, CNR)
//! and lateral resolution.
//!
//! PSNR, SSIM and MI compare envelope images that share one normalization:
//! both are divided by the reference envelope's maximum, so `MAX_I = 1`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::recon::envelope;
use crate::ussim::{PolarGrid, PhantomSpec, RfImage};

pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;
pub const DEFAULT_BINS: usize = 64;
/// Smallest ROI accepted by [`cr_cnr`].
pub const MIN_ROI_PIXELS: usize = 25;

fn same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape(format!("images of {} and {} pixels", a.len(), b.len())));
    }
    Ok(())
}

/// `20 log10(MAX_I / sqrt(MSE))` with `MAX_I = max |reference|`.
///
/// Identical images give `+inf`.
pub fn psnr(pred: &[f64], reference: &[f64]) -> Result<f64> {
    same_len(pred, reference)?;
    let max_i = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mse = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - r) * (p - r))
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (max_i / mse.sqrt()).log10())
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Global SSIM with `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = 1`.
pub fn ssim(pred: &[f64], reference: &[f64]) -> Result<f64> {
    same_len(pred, reference)?;
    let (mp, vp) = mean_var(pred);
    let (mr, vr) = mean_var(reference);
    let cov = pred
        .iter()
        .zip(reference)
        .map(|(p, r)| (p - mp) * (r - mr))
        .sum::<f64>()
        / pred.len() as f64;
    Ok(((2.0 * mp * mr + SSIM_C1) * (2.0 * cov + SSIM_C2))
        / ((mp * mp + mr * mr + SSIM_C1) * (vp + vr + SSIM_C2)))
}

fn bin_indices(x: &[f64], bins: usize) -> Option<Vec<usize>> {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if !(hi > lo) {
        return None;
    }
    Some(
        x.iter()
            .map(|&v| (((v - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1))
            .collect(),
    )
}

/// `-sum p ln p` over the nonzero counts, in index order.
fn entropy(counts: &[usize], n: f64) -> f64 {
    -counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| c as f64 / n * (c as f64 / n).ln())
        .sum::<f64>()
}

/// Mutual information in nats from a `bins × bins` joint histogram spanning
/// each image's own range. A constant image gives 0.
///
/// Evaluated as `H(a) + H(b) - H(a, b)`, which makes `MI(a, a)` equal to
/// [`histogram_entropy`] to the last bit.
pub fn mutual_information(a: &[f64], b: &[f64], bins: usize) -> Result<f64> {
    same_len(a, b)?;
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 histogram bins, got {bins}")));
    }
    let (Some(ia), Some(ib)) = (bin_indices(a, bins), bin_indices(b, bins)) else {
        return Ok(0.0);
    };
    let mut joint = vec![0usize; bins * bins];
    let mut pa = vec![0usize; bins];
    let mut pb = vec![0usize; bins];
    for (&i, &j) in ia.iter().zip(&ib) {
        joint[i * bins + j] += 1;
        pa[i] += 1;
        pb[j] += 1;
    }
    let n = a.len() as f64;
    Ok((entropy(&pa, n) + entropy(&pb, n) - entropy(&joint, n)).max(0.0))
}

/// Shannon entropy (nats) of an image's histogram on the same binning as
/// [`mutual_information`].
pub fn histogram_entropy(a: &[f64], bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::invalid(format!("need at least 2 histogram bins, got {bins}")));
    }
    let Some(idx) = bin_indices(a, bins) else {
        return Ok(0.0);
    };
    let mut counts = vec![0usize; bins];
    idx.iter().for_each(|&i| counts[i] += 1);
    Ok(entropy(&counts, a.len() as f64))
}

/// Region of an image in grid coordinates (rows along depth, columns along angle).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Region {
    Ellipse {
        row: f64,
        col: f64,
        radius_rows: f64,
        radius_cols: f64,
    },
    Rect {
        row0: usize,
        row1: usize,
        col0: usize,
        col1: usize,
    },
}

impl Region {
    pub fn contains(&self, row: usize, col: usize) -> bool {
        match *self {
            Region::Ellipse {
                row: r,
                col: c,
                radius_rows,
                radius_cols,
            } => ((row as f64 - r) / radius_rows).powi(2) + ((col as f64 - c) / radius_cols).powi(2) <= 1.0,
            Region::Rect { row0, row1, col0, col1 } => (row0..row1).contains(&row) && (col0..col1).contains(&col),
        }
    }

    /// Pixel indices covered in an `h × w` image; errors if the region leaves it.
    pub fn pixels(&self, h: usize, w: usize) -> Result<Vec<usize>> {
        let inside = match *self {
            Region::Ellipse {
                row,
                col,
                radius_rows,
                radius_cols,
            } => {
                radius_rows > 0.0
                    && radius_cols > 0.0
                    && row - radius_rows >= 0.0
                    && col - radius_cols >= 0.0
                    && row + radius_rows <= (h - 1) as f64
                    && col + radius_cols <= (w - 1) as f64
            }
            Region::Rect { row0, row1, col0, col1 } => row0 < row1 && col0 < col1 && row1 <= h && col1 <= w,
        };
        if !inside {
            return Err(Error::invalid(format!("region {self:?} is empty or leaves the {h}×{w} image")));
        }
        Ok((0..h * w).filter(|&i| self.contains(i / w, i % w)).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiStats {
    pub region: Region,
    pub mean: f64,
    /// Population variance.
    pub variance: f64,
    pub pixels: usize,
}

impl RoiStats {
    pub fn measure(env: &RfImage, region: &Region) -> Result<Self> {
        let idx = region.pixels(env.height(), env.width())?;
        if idx.len() < MIN_ROI_PIXELS {
            return Err(Error::invalid(format!(
                "region covers {} pixels, at least {MIN_ROI_PIXELS} needed",
                idx.len()
            )));
        }
        let values: Vec<f64> = idx.iter().map(|&i| env.data.data()[i]).collect();
        let (mean, variance) = mean_var(&values);
        Ok(Self {
            region: region.clone(),
            mean,
            variance,
            pixels: idx.len(),
        })
    }
}

/// `CR = -20 log10(mu_t / mu_b)` and `CNR = 20 log10(|mu_t - mu_b| / sqrt(var_t + var_b))`.
///
/// `mu_t = 0` gives CR `+inf`; `mu_t = mu_b` gives CNR `-inf`.
pub fn contrast(target: &RoiStats, background: &RoiStats) -> Result<(f64, f64)> {
    if !(background.mean > 0.0) {
        return Err(Error::invalid("background mean must be positive"));
    }
    let cr = -20.0 * (target.mean / background.mean).log10();
    let cnr = 20.0 * ((target.mean - background.mean).abs() / (target.variance + background.variance).sqrt()).log10();
    Ok((cr, cnr))
}

/// CR and CNR (dB) of two disjoint regions of an envelope image.
pub fn cr_cnr(env: &RfImage, target: &Region, background: &Region) -> Result<(f64, f64)> {
    let (h, w) = (env.height(), env.width());
    let t = target.pixels(h, w)?;
    let b = background.pixels(h, w)?;
    if t.iter().any(|i| b.binary_search(i).is_ok()) {
        return Err(Error::invalid("target and background regions overlap"));
    }
    contrast(&RoiStats::measure(env, target)?, &RoiStats::measure(env, background)?)
}

/// Full width at half maximum (mm) of a point target's lateral profile.
///
/// The peak is searched within ±`search` cells of `(row, col)`; the
/// constant-depth profile through it is interpolated linearly to find the
/// half-maximum crossings on either side.
pub fn lateral_resolution(env: &RfImage, wire: (f64, f64), grid: &PolarGrid) -> Result<f64> {
    const SEARCH: isize = 3;
    const CONTEXT: isize = 10;
    let (h, w) = (env.height() as isize, env.width() as isize);
    if (h as usize, w as usize) != grid.dims() {
        return Err(Error::shape(format!("envelope {h}×{w} does not match grid {:?}", grid.dims())));
    }
    let (r0, c0) = (wire.0.round() as isize, wire.1.round() as isize);
    let clamp = |v: isize, n: isize| v.clamp(0, n - 1) as usize;
    let mut peak = (clamp(r0, h), clamp(c0, w));
    for r in r0 - SEARCH..=r0 + SEARCH {
        for c in c0 - SEARCH..=c0 + SEARCH {
            if (0..h).contains(&r) && (0..w).contains(&c) && env.at(r as usize, c as usize) > env.at(peak.0, peak.1) {
                peak = (r as usize, c as usize);
            }
        }
    }
    let top = env.at(peak.0, peak.1);
    let mut around: Vec<f64> = Vec::new();
    for r in r0 - CONTEXT..=r0 + CONTEXT {
        for c in c0 - CONTEXT..=c0 + CONTEXT {
            if (0..h).contains(&r) && (0..w).contains(&c) {
                around.push(env.at(r as usize, c as usize));
            }
        }
    }
    around.sort_by(f64::total_cmp);
    let median = around[around.len() / 2];
    if !(top > 0.0) || 20.0 * (top / median).log10() < 6.0 {
        return Err(Error::UnresolvedTarget(format!(
            "peak at ({}, {}) is less than 6 dB above its surroundings",
            peak.0, peak.1
        )));
    }
    let half = top / 2.0;
    let profile: Vec<f64> = (0..w as usize).map(|c| env.at(peak.0, c)).collect();
    let crossing = |dir: isize| -> Option<f64> {
        let mut c = peak.1 as isize;
        loop {
            let next = c + dir;
            if !(0..w).contains(&next) {
                return None;
            }
            let (a, b) = (profile[c as usize], profile[next as usize]);
            if b <= half {
                return Some(c as f64 + dir as f64 * (a - half) / (a - b));
            }
            c = next;
        }
    };
    let (Some(left), Some(right)) = (crossing(-1), crossing(1)) else {
        return Err(Error::UnresolvedTarget(format!(
            "half-maximum crossings of the target at ({}, {}) lie outside the image",
            peak.0, peak.1
        )));
    };
    Ok((right - left) * grid.angle_step() * grid.radius(peak.0) * 1000.0)
}

/// Envelopes of `pred` and `reference`, both divided by the reference envelope's maximum.
pub fn normalized_envelopes(pred: &RfImage, reference: &RfImage) -> Result<(Vec<f64>, Vec<f64>)> {
    pred.data.ensure_same_dims(&reference.data, "compared images")?;
    let ep = envelope(pred);
    let er = envelope(reference);
    let scale = er.data.max_abs();
    if !(scale > 0.0) {
        return Err(Error::invalid("reference image is all zero"));
    }
    Ok((
        ep.data.data().iter().map(|v| v / scale).collect(),
        er.data.data().iter().map(|v| v / scale).collect(),
    ))
}

/// PSNR, SSIM and MI of one prediction against its reference.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fidelity {
    pub psnr: f64,
    pub ssim: f64,
    pub mi: f64,
}

pub fn fidelity(pred: &RfImage, reference: &RfImage, bins: usize) -> Result<Fidelity> {
    let (p, r) = normalized_envelopes(pred, reference)?;
    Ok(Fidelity {
        psnr: psnr(&p, &r)?,
        ssim: ssim(&p, &r)?,
        mi: mutual_information(&p, &r, bins)?,
    })
}

/// Target/background pair for contrast measurements.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoiPair {
    pub name: String,
    pub target: Region,
    pub background: Region,
}

/// Point target location in fractional grid coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireTarget {
    pub name: String,
    pub row: f64,
    pub col: f64,
}

/// Named regions for contrast and resolution measurements.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RoiSpec {
    #[serde(default)]
    pub pairs: Vec<RoiPair>,
    #[serde(default)]
    pub wires: Vec<WireTarget>,
}

impl RoiSpec {
    /// Contrast pairs for each anechoic region of `phantom`: the target is
    /// the inner 70% of the region, the background a same-sized disc at the
    /// same depth, shifted sideways by 2.5 radii (towards the wider side).
    pub fn for_phantom(phantom: &PhantomSpec, grid: &PolarGrid) -> Self {
        let names = ["near", "far"];
        let mut pairs = Vec::new();
        for (i, e) in phantom.anechoic.iter().enumerate() {
            let (row, col) = grid.locate(e.cx, e.cz);
            let depth = e.cx.hypot(e.cz);
            let radius = e.rx.min(e.rz) * 0.7;
            let rr = radius / grid.depth_step();
            let rc = radius / (depth * grid.angle_step());
            let shift = 2.5 * e.rx.max(e.rz) / (depth * grid.angle_step());
            let side = if col <= (grid.lines - 1) as f64 / 2.0 { 1.0 } else { -1.0 };
            let disc = |col| Region::Ellipse {
                row,
                col,
                radius_rows: rr,
                radius_cols: rc,
            };
            pairs.push(RoiPair {
                name: names.get(i).map_or_else(|| format!("region{i}"), |n| n.to_string()),
                target: disc(col),
                background: disc(col + side * shift),
            });
        }
        let wires = phantom
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (row, col) = grid.locate(p.x, p.z);
                WireTarget {
                    name: format!("wire{i}"),
                    row,
                    col,
                }
            })
            .collect();
        Self { pairs, wires }
    }
}

/// Contrast and resolution of one image over an [`RoiSpec`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    /// dB per pair name.
    pub cr: BTreeMap<String, f64>,
    pub cnr: BTreeMap<String, f64>,
    /// mm per wire name.
    pub lr: BTreeMap<String, f64>,
}

pub fn region_report(rf: &RfImage, rois: &RoiSpec, grid: &PolarGrid) -> Result<RegionReport> {
    let env = envelope(rf);
    let mut out = RegionReport::default();
    for p in &rois.pairs {
        let (cr, cnr) = cr_cnr(&env, &p.target, &p.background)?;
        out.cr.insert(p.name.clone(), cr);
        out.cnr.insert(p.name.clone(), cnr);
    }
    for wt in &rois.wires {
        out.lr.insert(wt.name.clone(), lateral_resolution(&env, (wt.row, wt.col), grid)?);
    }
    Ok(out)
}

/// Constants used by a [`MetricsReport`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsMeta {
    pub max_i: f64,
    pub c1: f64,
    pub c2: f64,
    pub bins: usize,
    pub normalization: String,
}

impl MetricsMeta {
    pub fn new(bins: usize) -> Self {
        Self {
            max_i: 1.0,
            c1: SSIM_C1,
            c2: SSIM_C2,
            bins,
            normalization: "envelope / max(reference envelope)".into(),
        }
    }
}

/// Mean and standard deviation over a set of images (infinite values excluded).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Self {
        let v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return Self {
                mean: f64::NAN,
                std: f64::NAN,
                count: 0,
            };
        }
        let (mean, var) = mean_var(&v);
        Self {
            mean,
            std: var.sqrt(),
            count: v.len(),
        }
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.3} ± {:.3}", self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelitySummary {
    pub psnr: Summary,
    pub ssim: Summary,
    pub mi: Summary,
}

impl FidelitySummary {
    pub fn of(items: &[Fidelity]) -> Self {
        Self {
            psnr: Summary::of(items.iter().map(|f| f.psnr)),
            ssim: Summary::of(items.iter().map(|f| f.ssim)),
            mi: Summary::of(items.iter().map(|f| f.mi)),
        }
    }
}

/// Evaluation results for one method.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: String,
    pub fidelity: FidelitySummary,
    pub regions: RegionReport,
    pub meta: MetricsMeta,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    #[test]
    fn psnr_examples() {
        // MAX_I = 1 and MSE = 0.01 → 20 dB
        let r = vec![1.0, 0.0, 0.0, 0.0];
        let p = vec![1.2, 0.0, 0.0, 0.0];
        assert!((psnr(&p, &r).unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(psnr(&r, &r).unwrap(), f64::INFINITY);
        assert!(psnr(&r, &r[..3]).is_err());
    }

    #[test]
    fn ssim_examples() {
        let y: Vec<f64> = (0..50).map(|i| (i % 7) as f64 / 7.0).collect();
        assert!((ssim(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        let ay: Vec<f64> = y.iter().map(|v| 0.5 * v + 0.1).collect();
        assert!(ssim(&ay, &y).unwrap() < 1.0);
    }

    #[test]
    fn mi_of_constant_is_zero() {
        let a = vec![0.5; 20];
        let b: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_eq!(mutual_information(&a, &b, 8).unwrap(), 0.0);
        let mi = mutual_information(&b, &b, 8).unwrap();
        assert_eq!(mi, histogram_entropy(&b, 8).unwrap());
    }

    #[test]
    fn contrast_examples() {
        let t = RoiStats {
            region: Region::Rect {
                row0: 0,
                row1: 5,
                col0: 0,
                col1: 5,
            },
            mean: 0.1,
            variance: 0.0,
            pixels: 25,
        };
        let b = RoiStats {
            mean: 1.0,
            variance: 0.01,
            ..t.clone()
        };
        let (cr, cnr) = contrast(&t, &b).unwrap();
        assert!((cr - 20.0).abs() < 1e-12);
        assert!((cnr - 20.0 * (0.9f64 / 0.1).log10()).abs() < 1e-12);
        let (cr, cnr) = contrast(&b, &b).unwrap();
        assert_eq!(cr, 0.0);
        assert_eq!(cnr, f64::NEG_INFINITY);
    }

    #[test]
    fn roi_rules() {
        let env = RfImage::new(Tensor::full(&[20, 20], 1.0).unwrap()).unwrap();
        let small = Region::Rect {
            row0: 0,
            row1: 4,
            col0: 0,
            col1: 4,
        };
        let big = Region::Rect {
            row0: 10,
            row1: 16,
            col0: 10,
            col1: 16,
        };
        assert!(cr_cnr(&env, &small, &big).is_err());
        assert!(cr_cnr(&env, &big, &big).is_err());
        let outside = Region::Ellipse {
            row: 18.0,
            col: 10.0,
            radius_rows: 4.0,
            radius_cols: 4.0,
        };
        assert!(RoiStats::measure(&env, &outside).is_err());
    }

    #[test]
    fn triangle_fwhm_equals_half_width() {
        let grid = PolarGrid::desk();
        let a = 4.0;
        let (row, col) = (60, 30);
        let data = Tensor::from_fn(&[128, 64], |i| {
            let (r, c) = (i / 64, i % 64);
            if r == row {
                (1.0 - (c as f64 - col as f64).abs() / a).max(0.0)
            } else {
                0.0
            }
        })
        .unwrap();
        let env = RfImage::new(data).unwrap();
        let mm = lateral_resolution(&env, (row as f64, col as f64), &grid).unwrap();
        let width_cols = mm / (grid.angle_step() * grid.radius(row) * 1000.0);
        assert!((width_cols - a).abs() < 1e-9, "{width_cols}");
    }

    #[test]
    fn flat_target_is_unresolved() {
        let grid = PolarGrid::desk();
        let env = RfImage::new(Tensor::full(&[128, 64], 1.0).unwrap()).unwrap();
        assert!(matches!(
            lateral_resolution(&env, (50.0, 30.0), &grid),
            Err(Error::UnresolvedTarget(_))
        ));
    }
}
