//! Column-by-column correction of roller-scan misalignment.
//!
//! Each column is moved vertically by the integer shift that minimises the
//! distance-weighted sum of norms to its already-corrected left neighbours:
//!
//! ```text
//! ŝ_i = argmin_s  Σ_{j=max(0,i−n)}^{i−1}  ‖c_i^s − c_j‖_k / |i−j|^p
//! ```
//!
//! The outer loop is inherently sequential. Candidate shifts for one column
//! are scored in parallel; every score is computed in a fixed order so the
//! result does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{GrayImage, Rgb, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    L1,
    L2,
}

impl NormOrder {
    pub fn from_order(k: u32) -> Result<Self> {
        match k {
            1 => Ok(NormOrder::L1),
            2 => Ok(NormOrder::L2),
            _ => Err(Error::invalid(format!("norm order must be 1 or 2, got {k}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Number of previous columns compared against.
    pub n: usize,
    /// Distance-weight exponent.
    pub p: f64,
    pub k: NormOrder,
    /// Symmetric search bound; clipped to `height − 1`.
    pub max_shift: usize,
    /// Fill for rows vacated by a shift.
    pub pad_value: u8,
    /// Score only rows where the shifted column has real pixels, as a
    /// per-row mean, instead of the padded full column.
    pub overlap_only: bool,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            n: 100,
            p: 1.0,
            k: NormOrder::L2,
            max_shift: 200,
            pad_value: 0,
            overlap_only: false,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("neighbour window n must be ≥ 1"));
        }
        if !self.p.is_finite() {
            return Err(Error::invalid(format!("weight exponent p={} is not finite", self.p)));
        }
        Ok(())
    }
}

/// One vertical shift per column; positive moves content down.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ShiftProfile {
    pub shifts: Vec<i64>,
}

impl ShiftProfile {
    pub fn negated(&self) -> ShiftProfile {
        ShiftProfile {
            shifts: self.shifts.iter().map(|s| -s).collect(),
        }
    }
}

/// ITU-R BT.601 luma, rounded.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let data = img
        .data
        .iter()
        .map(|&[r, g, b]| {
            let y = 0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            y.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// `out[y] = src[y − s]`, or `pad` where that index falls outside the column.
fn shift_into<T: Copy>(src: &[T], s: i64, pad: T, out: &mut [T]) {
    let h = src.len() as i64;
    for (y, slot) in out.iter_mut().enumerate() {
        let from = y as i64 - s;
        *slot = if (0..h).contains(&from) {
            src[from as usize]
        } else {
            pad
        };
    }
}

/// A corrected neighbour column with prefix sums of its distance to the pad
/// value, so the padded rows of any candidate cost O(1).
struct RefColumn {
    px: Vec<u8>,
    /// `pad_cost[y]` = Σ_{r<y} |pad − px[r]|^k.
    pad_cost: Vec<u64>,
}

impl RefColumn {
    fn new(px: Vec<u8>, pad: u8, k: NormOrder) -> Self {
        let mut pad_cost = Vec::with_capacity(px.len() + 1);
        let mut acc = 0u64;
        pad_cost.push(0);
        for &v in &px {
            let d = (pad as i64 - v as i64).unsigned_abs();
            acc += match k {
                NormOrder::L1 => d,
                NormOrder::L2 => d * d,
            };
            pad_cost.push(acc);
        }
        RefColumn { px, pad_cost }
    }
}

fn overlap_power_sum(a: &[u8], b: &[u8], k: NormOrder) -> u64 {
    match k {
        NormOrder::L1 => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| (x as i32 - y as i32).unsigned_abs())
            .sum::<u32>() as u64,
        NormOrder::L2 => a
            .iter()
            .zip(b)
            .map(|(&x, &y)| {
                let d = x as i32 - y as i32;
                (d * d) as u32
            })
            .fold(0u64, |acc, v| acc + v as u64),
    }
}

/// `‖c^s − r‖_k` for column `col` shifted by `s`.
fn shifted_norm(col: &[u8], s: i64, r: &RefColumn, cfg: &AlignConfig) -> f64 {
    let h = col.len();
    let mag = s.unsigned_abs() as usize;
    // Rows [lo, hi) of the output hold real pixels col[y − s].
    let (lo, hi) = if s >= 0 { (mag, h) } else { (0, h - mag) };
    let src = if s >= 0 { &col[..h - mag] } else { &col[mag..] };
    let inner = overlap_power_sum(src, &r.px[lo..hi], cfg.k);
    let (sum, rows) = if cfg.overlap_only {
        (inner, hi - lo)
    } else {
        let padded = r.pad_cost[lo] + (r.pad_cost[h] - r.pad_cost[hi]);
        (inner + padded, h)
    };
    let total = sum as f64;
    let total = if cfg.overlap_only {
        total / rows.max(1) as f64
    } else {
        total
    };
    match cfg.k {
        NormOrder::L1 => total,
        NormOrder::L2 => total.sqrt(),
    }
}

/// Candidate order implementing the tie-break: 0, −1, +1, −2, +2, …
fn candidate_order(max_shift: i64) -> Vec<i64> {
    let mut v = Vec::with_capacity(2 * max_shift as usize + 1);
    v.push(0);
    for m in 1..=max_shift {
        v.push(-m);
        v.push(m);
    }
    v
}

pub fn optimal_shifts(gray: &GrayImage, cfg: &AlignConfig) -> Result<ShiftProfile> {
    cfg.validate()?;
    if gray.width < 2 {
        return Err(Error::invalid(format!(
            "alignment needs at least 2 columns, got {}",
            gray.width
        )));
    }
    if gray.height == 0 {
        return Err(Error::invalid("alignment needs a non-empty image"));
    }
    let max_shift = cfg.max_shift.min(gray.height - 1) as i64;
    let candidates = candidate_order(max_shift);

    let first = gray.column(0);
    let mut corrected = vec![RefColumn::new(first, cfg.pad_value, cfg.k)];
    let mut shifts = vec![0i64];
    let mut buf = vec![0u8; gray.height];

    for i in 1..gray.width {
        let col = gray.column(i);
        let window = i.saturating_sub(cfg.n)..i;
        let weights: Vec<f64> = window
            .clone()
            .map(|j| 1.0 / ((i - j) as f64).powf(cfg.p))
            .collect();
        let refs = &corrected[window];
        let costs: Vec<f64> = candidates
            .par_iter()
            .map(|&s| {
                refs.iter()
                    .zip(&weights)
                    .map(|(r, w)| w * shifted_norm(&col, s, r, cfg))
                    .sum()
            })
            .collect();
        let mut best = 0;
        for (idx, &c) in costs.iter().enumerate() {
            if c < costs[best] {
                best = idx;
            }
        }
        let s = candidates[best];
        shift_into(&col, s, cfg.pad_value, &mut buf);
        corrected.push(RefColumn::new(buf.clone(), cfg.pad_value, cfg.k));
        shifts.push(s);
    }
    Ok(ShiftProfile { shifts })
}

/// Baseline: aligns the first above-threshold row of every column with that
/// of column 0. Columns without a bright pixel (and every column, when
/// column 0 has none) get shift 0.
pub fn threshold_align(gray: &GrayImage, threshold: u8) -> Result<ShiftProfile> {
    if threshold == 0 || threshold == 255 {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 255), got {threshold}"
        )));
    }
    let first_bright =
        |x: usize| (0..gray.height).find(|&y| gray.get(x, y) > threshold).map(|y| y as i64);
    let shifts = match (gray.width > 0).then(|| first_bright(0)).flatten() {
        None => vec![0; gray.width],
        Some(top0) => (0..gray.width)
            .map(|x| first_bright(x).map_or(0, |top| top0 - top))
            .collect(),
    };
    Ok(ShiftProfile { shifts })
}

fn check_len(width: usize, shifts: &ShiftProfile) -> Result<()> {
    if shifts.shifts.len() != width {
        return Err(Error::invalid(format!(
            "shift profile has {} entries for an image {width} columns wide",
            shifts.shifts.len()
        )));
    }
    Ok(())
}

pub fn apply_shifts(img: &RgbImage, shifts: &ShiftProfile, pad: Rgb) -> Result<RgbImage> {
    check_len(img.width, shifts)?;
    let mut out = img.clone();
    let mut col = vec![pad; img.height];
    let mut moved = vec![pad; img.height];
    for (x, &s) in shifts.shifts.iter().enumerate() {
        for (y, c) in col.iter_mut().enumerate() {
            *c = img.get(x, y);
        }
        shift_into(&col, s, pad, &mut moved);
        for (y, &v) in moved.iter().enumerate() {
            out.set(x, y, v);
        }
    }
    Ok(out)
}

pub fn apply_shifts_gray(img: &GrayImage, shifts: &ShiftProfile, pad: u8) -> Result<GrayImage> {
    check_len(img.width, shifts)?;
    let mut out = img.clone();
    let mut moved = vec![pad; img.height];
    for (x, &s) in shifts.shifts.iter().enumerate() {
        shift_into(&img.column(x), s, pad, &mut moved);
        for (y, &v) in moved.iter().enumerate() {
            out.set(x, y, v);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(max_shift: usize) -> AlignConfig {
        AlignConfig {
            max_shift,
            ..AlignConfig::default()
        }
    }

    #[test]
    fn grayscale_examples() {
        let img = RgbImage::new(3, 1, vec![[255, 255, 255], [0, 0, 0], [255, 0, 0]]).unwrap();
        assert_eq!(to_grayscale(&img).data, vec![255, 0, 76]);
    }

    #[test]
    fn constant_image_has_zero_shifts() {
        let g = GrayImage::filled(20, 30, 117);
        assert_eq!(optimal_shifts(&g, &cfg(10)).unwrap().shifts, vec![0; 20]);
    }

    #[test]
    fn two_column_shift_recovered() {
        let h = 40;
        let col: Vec<u8> = (0..h).map(|y| if (15..22).contains(&y) { 200 } else { (y * 3) as u8 }).collect();
        let mut moved = vec![0; h];
        shift_into(&col, 3, 0, &mut moved);
        let mut g = GrayImage::filled(2, h, 0);
        for y in 0..h {
            g.set(0, y, col[y]);
            g.set(1, y, moved[y]);
        }
        let profile = optimal_shifts(&g, &cfg(10)).unwrap();
        assert_eq!(profile.shifts, vec![0, -3]);

        // Exhaustive: -3 is the unique minimiser over all 21 candidates.
        let r = RefColumn::new(col.clone(), 0, NormOrder::L2);
        let c = cfg(10);
        let at = |s| shifted_norm(&moved, s, &r, &c);
        for s in -10..=10 {
            if s != -3 {
                assert!(at(s) > at(-3), "s={s}");
            }
        }
    }

    #[test]
    fn shifted_norm_matches_naive() {
        let col: Vec<u8> = (0..25).map(|y| (y * 37 % 251) as u8).collect();
        let refc: Vec<u8> = (0..25).map(|y| (y * 11 % 200) as u8).collect();
        for k in [NormOrder::L1, NormOrder::L2] {
            let c = AlignConfig {
                k,
                pad_value: 9,
                ..AlignConfig::default()
            };
            let r = RefColumn::new(refc.clone(), 9, k);
            for s in -24..=24 {
                let mut buf = vec![0; 25];
                shift_into(&col, s, 9, &mut buf);
                let sum: f64 = buf
                    .iter()
                    .zip(&refc)
                    .map(|(&a, &b)| {
                        let d = (a as f64 - b as f64).abs();
                        if k == NormOrder::L1 { d } else { d * d }
                    })
                    .sum();
                let want = if k == NormOrder::L1 { sum } else { sum.sqrt() };
                assert!((shifted_norm(&col, s, &r, &c) - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn narrow_image_rejected() {
        assert!(optimal_shifts(&GrayImage::filled(1, 10, 0), &cfg(3)).is_err());
        let bad = AlignConfig { n: 0, ..cfg(3) };
        assert!(optimal_shifts(&GrayImage::filled(4, 10, 0), &bad).is_err());
        assert!(NormOrder::from_order(3).is_err());
    }

    #[test]
    fn apply_shift_definition() {
        let img = RgbImage::new(1, 3, vec![[1, 1, 1], [2, 2, 2], [3, 3, 3]]).unwrap();
        let pad = [9, 9, 9];
        let zero = ShiftProfile { shifts: vec![0] };
        assert_eq!(apply_shifts(&img, &zero, pad).unwrap(), img);
        let down = apply_shifts(&img, &ShiftProfile { shifts: vec![1] }, pad).unwrap();
        assert_eq!(down.data, vec![pad, [1, 1, 1], [2, 2, 2]]);
        assert!(apply_shifts(&img, &ShiftProfile { shifts: vec![0, 0] }, pad).is_err());
    }

    #[test]
    fn threshold_examples() {
        let mut g = GrayImage::filled(4, 20, 0);
        for x in 0..4 {
            for y in 5..15 {
                g.set(x, y, 200);
            }
        }
        assert_eq!(threshold_align(&g, 40).unwrap().shifts, vec![0; 4]);

        // Column 2 starts 5 rows lower; column 3 is dark.
        for y in 5..10 {
            g.set(2, y, 0);
        }
        for y in 0..20 {
            g.set(3, y, 10);
        }
        let p = threshold_align(&g, 40).unwrap();
        assert_eq!(p.shifts, vec![0, 0, -5, 0]);
        let fixed = apply_shifts_gray(&g, &p, 0).unwrap();
        assert_eq!(fixed.get(2, 5), 200);
        assert_eq!(fixed.get(2, 4), 0);
        assert!(threshold_align(&g, 0).is_err());
    }
}
