//! Ellipse outlines drawn over an image.
//!
//! Ground truth is drawn in green and detections in red. A baseline, when
//! present, gets blue.

use std::f64::consts::TAU;
use std::path::PathBuf;

use elgauss_core::raster::load_rgb;
use elgauss_core::{Ellipse, Error, Result, Rgb, RgbImage};

pub const GROUND_TRUTH: Rgb = [0, 255, 0];
pub const PREDICTION: Rgb = [255, 0, 0];
pub const BASELINE: Rgb = [0, 0, 255];

/// Lower bound on boundary samples per ellipse.
pub const MIN_BOUNDARY_SAMPLES: usize = 720;

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayGroup {
    pub label: String,
    pub color: Rgb,
    pub ellipses: Vec<Ellipse>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlaySpec {
    pub image_path: PathBuf,
    pub groups: Vec<OverlayGroup>,
    pub stroke_width: u32,
}

impl OverlaySpec {
    pub fn validate(&self) -> Result<()> {
        if self.stroke_width == 0 {
            return Err(Error::InvalidInput("stroke width must be at least 1".into()));
        }
        for (i, g) in self.groups.iter().enumerate() {
            if let Some(other) = self.groups[..i].iter().find(|o| o.color == g.color) {
                return Err(Error::InvalidInput(format!(
                    "groups `{}` and `{}` share the colour {:?}",
                    other.label, g.label, g.color
                )));
            }
            for e in &g.ellipses {
                e.validate()?;
            }
        }
        Ok(())
    }
}

pub fn render_overlay(spec: &OverlaySpec) -> Result<RgbImage> {
    spec.validate()?;
    let mut img = load_rgb(&spec.image_path)?;
    for g in &spec.groups {
        for e in &g.ellipses {
            draw_ellipse(&mut img, e, g.color, spec.stroke_width);
        }
    }
    Ok(img)
}

/// Number of parametric samples used for `e`: at least
/// [`MIN_BOUNDARY_SAMPLES`], and dense enough that neighbours are under half
/// a pixel apart so the outline has no gaps.
pub fn boundary_samples(e: &Ellipse) -> usize {
    let reach = TAU * e.rx.max(e.ry);
    MIN_BOUNDARY_SAMPLES.max((2.0 * reach).ceil() as usize)
}

/// Strokes the outline of `e`. Pixel `(x, y)` has its centre at the integer
/// point `(x, y)`. Each boundary sample paints the disc of radius
/// `(stroke − 1) / 2` around its nearest pixel; anything off-frame is
/// clipped.
pub fn draw_ellipse(img: &mut RgbImage, e: &Ellipse, color: Rgb, stroke_width: u32) {
    let r = (stroke_width.max(1) - 1) as f64 / 2.0;
    let ri = r.ceil() as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let n = boundary_samples(e);
    for k in 0..n {
        let p = e.boundary_point(TAU * k as f64 / n as f64);
        if !p.x.is_finite() || !p.y.is_finite() {
            continue;
        }
        let (px, py) = (p.x.round() as i64, p.y.round() as i64);
        if px + ri < 0 || py + ri < 0 || px - ri >= w || py - ri >= h {
            continue;
        }
        for dy in -ri..=ri {
            for dx in -ri..=ri {
                if ((dx * dx + dy * dy) as f64) > r * r {
                    continue;
                }
                let (x, y) = (px + dx, py + dy);
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    img.set(x as usize, y as usize, color);
                }
            }
        }
    }
}
