//! Synthetic scanned boards with known column jitter.
//!
//! A board is a bright horizontal band with row-wise grain on a dark,
//! slightly noisy background. Jitter moves column `i` down by `d_i` pixels,
//! with `d_0 = 0`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{GrayImage, Rgb, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardSpec {
    pub width: usize,
    /// Height of the wood band.
    pub band: usize,
    /// Background rows above and below the band.
    pub margin: usize,
    /// Upper bound on `|d_i|`.
    pub max_jitter: i64,
    /// Largest change of `d` between neighbouring columns.
    pub jitter_step: i64,
    /// Dark blobs hanging from the top edge of the band.
    pub edge_defects: usize,
    /// Interior dark knots.
    pub knots: usize,
}

impl Default for BoardSpec {
    fn default() -> Self {
        BoardSpec {
            width: 64,
            band: 80,
            margin: 210,
            max_jitter: 200,
            jitter_step: 15,
            edge_defects: 0,
            knots: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticBoard {
    pub clean: RgbImage,
    pub jittered: RgbImage,
    /// Downward displacement applied to each column.
    pub jitter: Vec<i64>,
}

fn grain(y: usize) -> f64 {
    let y = y as f64;
    150.0 + 35.0 * (y / 23.0 * std::f64::consts::TAU).sin() + 18.0 * (y / 7.3 * std::f64::consts::TAU).sin()
}

pub fn board(spec: &BoardSpec, seed: u64) -> SyntheticBoard {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = spec.band + 2 * spec.margin;
    let w = spec.width;
    let mut clean = RgbImage::filled(w, h, [0, 0, 0]);
    for y in 0..h {
        for x in 0..w {
            let px: Rgb = if (spec.margin..spec.margin + spec.band).contains(&y) {
                let v = grain(y) + rng.gen_range(-4.0..4.0);
                let v = v.clamp(0.0, 255.0);
                [(v * 1.1).min(255.0) as u8, v as u8, (v * 0.7) as u8]
            } else {
                let v = rng.gen_range(0..=8u8);
                [v, v, v]
            };
            clean.set(x, y, px);
        }
    }

    let top = spec.margin as f64;
    let mut blobs = Vec::new();
    for _ in 0..spec.edge_defects {
        let cx = rng.gen_range(0.0..w as f64);
        let rx = rng.gen_range(3.0..(w as f64 / 6.0).max(4.0));
        let ry = rng.gen_range(0.2..0.45) * spec.band as f64;
        blobs.push((cx, top, rx, ry, 20u8));
    }
    for _ in 0..spec.knots {
        let cx = rng.gen_range(0.0..w as f64);
        let cy = top + rng.gen_range(0.3..0.7) * spec.band as f64;
        let r = rng.gen_range(3.0..0.2 * spec.band as f64);
        blobs.push((cx, cy, r, r * 0.7, 70u8));
    }
    for &(cx, cy, rx, ry, v) in &blobs {
        for y in spec.margin..spec.margin + spec.band {
            for x in 0..w {
                let u = (x as f64 - cx) / rx;
                let t = (y as f64 - cy) / ry;
                if u * u + t * t <= 1.0 {
                    clean.set(x, y, [v, v / 2 + 5, v / 3]);
                }
            }
        }
    }

    let mut jitter = vec![0i64; w];
    for i in 1..w {
        let step = rng.gen_range(-spec.jitter_step..=spec.jitter_step);
        jitter[i] = (jitter[i - 1] + step).clamp(-spec.max_jitter, spec.max_jitter);
    }
    let mut jittered = RgbImage::filled(w, h, [0, 0, 0]);
    for (x, &d) in jitter.iter().enumerate() {
        for y in 0..h {
            let from = y as i64 - d;
            let px = if (0..h as i64).contains(&from) {
                clean.get(x, from as usize)
            } else {
                let v = rng.gen_range(0..=8u8);
                [v, v, v]
            };
            jittered.set(x, y, px);
        }
    }
    SyntheticBoard {
        clean,
        jittered,
        jitter,
    }
}

/// Binary band image (white rows `[top, top+band)` on black) with column
/// `i` displaced by `jitter[i]`.
pub fn white_band(width: usize, height: usize, top: usize, band: usize, jitter: &[i64]) -> GrayImage {
    let mut g = GrayImage::filled(width, height, 0);
    for x in 0..width {
        for y in top..top + band {
            let yy = y as i64 + jitter[x];
            if (0..height as i64).contains(&yy) {
                g.set(x, yy as usize, 255);
            }
        }
    }
    g
}
