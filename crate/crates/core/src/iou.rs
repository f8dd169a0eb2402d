//! Ellipse IoU by counting lattice points, plus detection matching.
//!
//! Ellipse–ellipse overlap has no closed form, so [`iou_grid`] places one
//! sample at every integer pixel location inside the tightest axis-aligned
//! rectangle covering both ellipses and counts. [`iou_oracle`] is a separate
//! construction (analytic row intervals of the inverse-covariance form on a
//! dense midpoint lattice) used to bound the grid's quantization error.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ellipse::{ellipse_bbox, ellipse_to_gaussian, AxisBox, Ellipse, InsideTest};
use crate::error::{Error, Result};

/// Covering rectangles narrower or shorter than this are supersampled.
pub const SUBPIXEL_EXTENT: f64 = 4.0;
/// Samples per pixel along each axis for sub-pixel ellipses.
pub const SUBPIXEL_DENSITY: u32 = 16;
pub const MIN_ORACLE_SAMPLES: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IoUResult {
    pub iou: f64,
    pub intersection_samples: u64,
    pub union_samples: u64,
    pub grid_w: u64,
    pub grid_h: u64,
}

/// Inclusive range of lattice indices `k` with `k·step ∈ [lo, hi]`.
fn lattice_range(lo: f64, hi: f64, step: f64) -> (i64, i64) {
    ((lo / step).ceil() as i64, (hi / step).floor() as i64)
}

fn span(r: (i64, i64)) -> u64 {
    (r.1 - r.0 + 1).max(0) as u64
}

/// Counts lattice points of spacing `step` inside `bx` that satisfy every test.
fn count_inside(bx: &AxisBox, step: f64, tests: &[InsideTest]) -> u64 {
    let xs = lattice_range(bx.x_min, bx.x_max, step);
    let ys = lattice_range(bx.y_min, bx.y_max, step);
    if xs.0 > xs.1 || ys.0 > ys.1 {
        return 0;
    }
    (ys.0..=ys.1)
        .into_par_iter()
        .map(|ky| {
            let y = ky as f64 * step;
            (xs.0..=xs.1)
                .filter(|&kx| {
                    let x = kx as f64 * step;
                    tests.iter().all(|t| t.contains(x, y))
                })
                .count() as u64
        })
        .sum()
}

fn intersect_boxes(a: &AxisBox, b: &AxisBox) -> Option<AxisBox> {
    let bx = AxisBox {
        x_min: a.x_min.max(b.x_min),
        y_min: a.y_min.max(b.y_min),
        x_max: a.x_max.min(b.x_max),
        y_max: a.y_max.min(b.y_max),
    };
    (bx.x_min <= bx.x_max && bx.y_min <= bx.y_max).then_some(bx)
}

/// Grid IoU with one sample per integer pixel location.
///
/// Points outside an ellipse's own box cannot be inside it, so each count is
/// taken over the smallest box that can contribute; the sampled lattice is
/// the same as scanning the full covering rectangle. Counting is integer and
/// therefore identical whatever the row scheduling.
pub fn iou_grid(a: &Ellipse, b: &Ellipse) -> Result<IoUResult> {
    let ba = ellipse_bbox(a)?;
    let bb = ellipse_bbox(b)?;
    let cover = ba.union(&bb);
    let step = if cover.width() < SUBPIXEL_EXTENT || cover.height() < SUBPIXEL_EXTENT {
        1.0 / SUBPIXEL_DENSITY as f64
    } else {
        1.0
    };
    let ta = InsideTest::new(a);
    let tb = InsideTest::new(b);
    let in_a = count_inside(&ba, step, &[ta]);
    let in_b = count_inside(&bb, step, &[tb]);
    let both = intersect_boxes(&ba, &bb).map_or(0, |bx| count_inside(&bx, step, &[ta, tb]));
    let union = in_a + in_b - both;
    let iou = if union == 0 {
        0.0
    } else {
        both as f64 / union as f64
    };
    Ok(IoUResult {
        iou,
        intersection_samples: both,
        union_samples: union,
        grid_w: span(lattice_range(cover.x_min, cover.x_max, step)),
        grid_h: span(lattice_range(cover.y_min, cover.y_max, step)),
    })
}

/// `{x : A(x−cx)² + 2B(x−cx)dy + C dy² ≤ 1}` for a fixed row offset `dy`,
/// with `[[A, B], [B, C]] = Σ⁻¹`.
struct RowSolver {
    cx: f64,
    cy: f64,
    a: f64,
    b: f64,
    c: f64,
}

impl RowSolver {
    fn new(e: &Ellipse) -> Result<Self> {
        let g = ellipse_to_gaussian(e)?;
        let inv = g
            .sigma
            .inverse()
            .ok_or_else(|| Error::Numerical("singular covariance".into()))?;
        Ok(RowSolver {
            cx: g.mu.x,
            cy: g.mu.y,
            a: inv.m00,
            b: 0.5 * (inv.m01 + inv.m10),
            c: inv.m11,
        })
    }

    fn interval(&self, y: f64) -> Option<(f64, f64)> {
        let dy = y - self.cy;
        let disc = self.b * self.b * dy * dy - self.a * (self.c * dy * dy - 1.0);
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        let mid = -self.b * dy / self.a;
        Some((self.cx + mid - root / self.a, self.cx + mid + root / self.a))
    }
}

/// High-density reference IoU: `n × n` midpoint samples over the covering
/// rectangle. Membership along each sample row is decided by solving the
/// ellipse's quadratic for that row rather than testing points one by one.
pub fn iou_oracle(a: &Ellipse, b: &Ellipse, samples_per_axis: usize) -> Result<f64> {
    if samples_per_axis < MIN_ORACLE_SAMPLES {
        return Err(Error::invalid(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples per axis, got {samples_per_axis}"
        )));
    }
    let cover = ellipse_bbox(a)?.union(&ellipse_bbox(b)?);
    let ra = RowSolver::new(a)?;
    let rb = RowSolver::new(b)?;
    let n = samples_per_axis;
    let dx = cover.width() / n as f64;
    let dy = cover.height() / n as f64;

    // Number of sample columns i in [0, n) whose x lies in [lo, hi].
    let cols = |lo: f64, hi: f64| -> u64 {
        let first = ((lo - cover.x_min) / dx - 0.5).ceil().max(0.0);
        let last = ((hi - cover.x_min) / dx - 0.5).floor().min(n as f64 - 1.0);
        if last < first {
            0
        } else {
            (last - first) as u64 + 1
        }
    };

    let (mut inter, mut union) = (0u64, 0u64);
    for j in 0..n {
        let y = cover.y_min + (j as f64 + 0.5) * dy;
        let ia = ra.interval(y);
        let ib = rb.interval(y);
        let ca = ia.map_or(0, |(l, h)| cols(l, h));
        let cb = ib.map_or(0, |(l, h)| cols(l, h));
        let ci = match (ia, ib) {
            (Some((l1, h1)), Some((l2, h2))) if l1.max(l2) <= h1.min(h2) => cols(l1.max(l2), h1.min(h2)),
            _ => 0,
        };
        inter += ci;
        union += ca + cb - ci;
    }
    Ok(if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub det: usize,
    pub gt: usize,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchReport {
    pub pairs: Vec<MatchedPair>,
    pub unmatched_detections: Vec<usize>,
    pub unmatched_ground_truths: Vec<usize>,
    pub mean_iou_matched: f64,
    pub mean_iou_penalized: f64,
}

impl MatchReport {
    /// Denominator of the penalized mean: `max(|detections|, |ground truths|)`.
    pub fn slots(&self) -> usize {
        let dets = self.pairs.len() + self.unmatched_detections.len();
        let gts = self.pairs.len() + self.unmatched_ground_truths.len();
        dets.max(gts)
    }

    pub fn iou_sum(&self) -> f64 {
        self.pairs.iter().map(|p| p.iou).sum()
    }
}

/// Greedy one-to-one matching by descending grid IoU. Pairs at or below
/// `min_iou` stay unmatched; ties go to the lower detection, then the lower
/// ground-truth index.
pub fn match_and_score(
    detections: &[Ellipse],
    ground_truths: &[Ellipse],
    min_iou: f64,
) -> Result<MatchReport> {
    if !(0.0..1.0).contains(&min_iou) {
        return Err(Error::invalid(format!("min_iou must lie in [0, 1), got {min_iou}")));
    }
    let nd = detections.len();
    let ng = ground_truths.len();
    let mut candidates: Vec<MatchedPair> = (0..nd * ng)
        .into_par_iter()
        .map(|k| {
            let (det, gt) = (k / ng, k % ng);
            iou_grid(&detections[det], &ground_truths[gt]).map(|r| MatchedPair { det, gt, iou: r.iou })
        })
        .collect::<Result<Vec<_>>>()?;
    candidates.retain(|p| p.iou > min_iou);
    candidates.sort_by(|x, y| {
        y.iou
            .total_cmp(&x.iou)
            .then(x.det.cmp(&y.det))
            .then(x.gt.cmp(&y.gt))
    });

    let mut det_used = vec![false; nd];
    let mut gt_used = vec![false; ng];
    let mut pairs = Vec::new();
    for c in candidates {
        if !det_used[c.det] && !gt_used[c.gt] {
            det_used[c.det] = true;
            gt_used[c.gt] = true;
            pairs.push(c);
        }
    }
    let unmatched = |used: &[bool]| -> Vec<usize> {
        used.iter()
            .enumerate()
            .filter_map(|(i, &u)| (!u).then_some(i))
            .collect()
    };
    let sum: f64 = pairs.iter().map(|p| p.iou).sum();
    let mean_iou_matched = if pairs.is_empty() {
        0.0
    } else {
        sum / pairs.len() as f64
    };
    let slots = nd.max(ng);
    let mean_iou_penalized = if slots == 0 { 0.0 } else { sum / slots as f64 };
    Ok(MatchReport {
        unmatched_detections: unmatched(&det_used),
        unmatched_ground_truths: unmatched(&gt_used),
        pairs,
        mean_iou_matched,
        mean_iou_penalized,
    })
}

/// Dataset-level means over several per-image reports: matched pairs are
/// pooled, and the penalized mean divides by the total slot count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanIoU {
    pub images: usize,
    pub matched_pairs: usize,
    pub slots: usize,
    pub mean_iou_matched: f64,
    pub mean_iou_penalized: f64,
}

pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a MatchReport>) -> MeanIoU {
    let mut out = MeanIoU::default();
    let mut sum = 0.0;
    for r in reports {
        out.images += 1;
        out.matched_pairs += r.pairs.len();
        out.slots += r.slots();
        sum += r.iou_sum();
    }
    if out.matched_pairs > 0 {
        out.mean_iou_matched = sum / out.matched_pairs as f64;
    }
    if out.slots > 0 {
        out.mean_iou_penalized = sum / out.slots as f64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact IoU of two radius-`r` circles with centers `d` apart.
    fn lens_iou(r: f64, d: f64) -> f64 {
        let inter = 2.0 * r * r * (d / (2.0 * r)).acos() - 0.5 * d * (4.0 * r * r - d * d).sqrt();
        let area = std::f64::consts::PI * r * r;
        inter / (2.0 * area - inter)
    }

    #[test]
    fn lens_formula_value() {
        assert!((lens_iou(10.0, 10.0) - 0.2430).abs() < 1e-4);
    }

    #[test]
    fn grid_examples() {
        let e = Ellipse::new(50.0, 50.0, 20.0, 10.0, 0.3).unwrap();
        let r = iou_grid(&e, &e).unwrap();
        assert_eq!(r.iou, 1.0);
        assert_eq!(r.intersection_samples, r.union_samples);

        let far = Ellipse::new(1050.0, 50.0, 10.0, 7.0, -0.4).unwrap();
        let small = Ellipse::circle(50.0, 50.0, 10.0);
        assert_eq!(iou_grid(&small, &far).unwrap().iou, 0.0);

        let a = Ellipse::circle(0.0, 0.0, 10.0);
        let b = Ellipse::circle(10.0, 0.0, 10.0);
        let r = iou_grid(&a, &b).unwrap();
        assert!((r.iou - lens_iou(10.0, 10.0)).abs() < 0.02, "{r:?}");
        assert_eq!((r.grid_w, r.grid_h), (31, 21));
    }

    #[test]
    fn grid_subpixel_supersamples() {
        let a = Ellipse::circle(0.3, 0.2, 0.8);
        let b = Ellipse::circle(0.6, 0.2, 0.8);
        let r = iou_grid(&a, &b).unwrap();
        assert!(r.union_samples > 100);
        let oracle = iou_oracle(&a, &b, 1024).unwrap();
        assert!((r.iou - oracle).abs() < 0.05, "{} vs {}", r.iou, oracle);
    }

    #[test]
    fn oracle_examples() {
        let e = Ellipse::new(50.0, 50.0, 20.0, 10.0, 0.3).unwrap();
        assert!((iou_oracle(&e, &e, 512).unwrap() - 1.0).abs() < 1e-12);
        let a = Ellipse::circle(0.0, 0.0, 10.0);
        let b = Ellipse::circle(10.0, 0.0, 10.0);
        assert!((iou_oracle(&a, &b, 2048).unwrap() - lens_iou(10.0, 10.0)).abs() < 0.001);
        let big = Ellipse::circle(0.0, 0.0, 20.0);
        assert!((iou_oracle(&a, &big, 2048).unwrap() - 0.25).abs() < 0.002);
        assert!(iou_oracle(&a, &b, 100).is_err());
    }

    #[test]
    fn match_examples() {
        let gt = Ellipse::new(100.0, 80.0, 30.0, 15.0, 0.2).unwrap();
        let r = match_and_score(&[gt], &[gt], 0.0).unwrap();
        assert_eq!((r.mean_iou_matched, r.mean_iou_penalized), (1.0, 1.0));

        let r = match_and_score(&[], &[gt], 0.0).unwrap();
        assert_eq!((r.mean_iou_matched, r.mean_iou_penalized), (0.0, 0.0));
        assert_eq!(r.unmatched_ground_truths, vec![0]);

        let r = match_and_score(&[], &[], 0.0).unwrap();
        assert_eq!(r, MatchReport::default());

        assert!(match_and_score(&[gt], &[gt], 1.0).is_err());
    }

    #[test]
    fn match_two_by_two() {
        // Two far-apart ground truths; each detection overlaps exactly one.
        let g0 = Ellipse::circle(0.0, 0.0, 20.0);
        let g1 = Ellipse::circle(500.0, 0.0, 20.0);
        let d0 = Ellipse::circle(3.0, 0.0, 20.0);
        let d1 = Ellipse::circle(510.0, 0.0, 20.0);
        let dets = [d1, d0];
        let gts = [g0, g1];
        let r = match_and_score(&dets, &gts, 0.0).unwrap();
        let i0 = iou_grid(&d0, &g0).unwrap().iou;
        let i1 = iou_grid(&d1, &g1).unwrap().iou;
        // Brute force over both assignments: only the diagonal one has overlap.
        let best = (i0 + i1).max(iou_grid(&d0, &g1).unwrap().iou + iou_grid(&d1, &g0).unwrap().iou);
        assert!((r.mean_iou_penalized - best / 2.0).abs() < 1e-15);
        assert_eq!(r.pairs.len(), 2);
        assert!(r.pairs[0].iou >= r.pairs[1].iou);
        assert_eq!((r.pairs[0].det, r.pairs[0].gt), (1, 0));
    }

    #[test]
    fn aggregate_pools_pairs() {
        let a = MatchReport {
            pairs: vec![MatchedPair { det: 0, gt: 0, iou: 0.8 }],
            unmatched_detections: vec![],
            unmatched_ground_truths: vec![1],
            mean_iou_matched: 0.8,
            mean_iou_penalized: 0.4,
        };
        let m = aggregate([&a, &MatchReport::default()]);
        assert_eq!(m.images, 2);
        assert_eq!(m.slots, 2);
        assert!((m.mean_iou_matched - 0.8).abs() < 1e-15);
        assert!((m.mean_iou_penalized - 0.4).abs() < 1e-15);
    }
}
