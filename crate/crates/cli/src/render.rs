//! PNG output for B-mode panels and label maps.

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use dwrecon_core::recon::{bmode, scan_convert};
use dwrecon_core::{PolarGrid, RfImage};
use image::GrayImage;

use crate::user_error;

/// Black columns between neighboring panels.
const GUTTER: usize = 8;

/// A grayscale panel, row-major.
pub struct Panel {
    pub height: usize,
    pub width: usize,
    pub gray: Vec<u8>,
}

/// B-mode of `rf`, scan-converted to `width` pixels across the sector, or
/// left on the polar grid when `grid` is `None`.
pub fn bmode_panel(rf: &RfImage, grid: Option<&PolarGrid>, dynamic_range: f64, width: usize) -> Result<Panel> {
    let b = bmode(rf, dynamic_range)?;
    match grid {
        Some(g) => {
            if g.dims() != (rf.height(), rf.width()) {
                return Err(user_error!(
                    "image is {}×{} but the grid is {:?}; pass the matching --config or use --polar",
                    rf.height(),
                    rf.width(),
                    g.dims()
                ));
            }
            let (height, width, gray) = scan_convert(&b, g, width)?;
            Ok(Panel { height, width, gray })
        }
        None => Ok(Panel {
            height: rf.height(),
            width: rf.width(),
            gray: b.to_gray(),
        }),
    }
}

/// Places panels side by side, top-aligned, and writes a grayscale PNG.
pub fn save_panels(panels: &[Panel], path: &Path) -> Result<()> {
    let height = panels.iter().map(|p| p.height).max().unwrap_or(0);
    let width = panels.iter().map(|p| p.width).sum::<usize>() + GUTTER * panels.len().saturating_sub(1);
    let mut out = vec![0u8; height * width];
    let mut left = 0;
    for p in panels {
        for r in 0..p.height {
            out[r * width + left..r * width + left + p.width].copy_from_slice(&p.gray[r * p.width..(r + 1) * p.width]);
        }
        left += p.width + GUTTER;
    }
    let img = GrayImage::from_raw(width as u32, height as u32, out).expect("buffer matches dimensions");
    img.save(path).with_context(|| format!("writing {}", path.display()))
}

/// Distinct colors for up to 12 labels, repeated beyond that.
const PALETTE: [[u8; 3]; 12] = [
    [31, 119, 180],
    [255, 127, 14],
    [44, 160, 44],
    [214, 39, 40],
    [148, 103, 189],
    [140, 86, 75],
    [227, 119, 194],
    [127, 127, 127],
    [188, 189, 34],
    [23, 190, 207],
    [255, 255, 255],
    [0, 0, 0],
];

pub fn palette_color(label: usize) -> [u8; 3] {
    PALETTE[label % PALETTE.len()]
}

/// Writes `labels` as an 8-bit indexed-color PNG with one palette entry per label.
pub fn save_indexed(labels: &[u8], height: usize, width: usize, colors: usize, path: &Path) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut encoder = png::Encoder::new(BufWriter::new(file), width as u32, height as u32);
    encoder.set_color(png::ColorType::Indexed);
    encoder.set_depth(png::BitDepth::Eight);
    encoder.set_palette((0..colors.max(1)).flat_map(palette_color).collect::<Vec<u8>>());
    let mut writer = encoder.write_header()?;
    writer.write_image_data(labels)?;
    writer.finish()?;
    Ok(())
}
