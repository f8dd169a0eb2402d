use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::schema::{save_annotation, AnnotatedImage, KnotAnnotation, Surface};
use super::stable_hash;
use crate::ellipse::AxisBox;
use crate::error::{Error, Result};
use crate::raster::{load_rgb, save_png};

pub const DEFAULT_OUT_SIZE: usize = 512;

/// Maps a knot from source-image pixels into an `out_size` square crop whose
/// top-left corner is `(x0, y0)` and side is `side`.
pub fn reparameterize(
    knot: &KnotAnnotation,
    x0: f64,
    y0: f64,
    side: f64,
    out_size: f64,
) -> Result<KnotAnnotation> {
    if !(side > 0.0) || !(out_size > 0.0) {
        return Err(Error::invalid(format!(
            "crop side and output size must be positive, got {side} and {out_size}"
        )));
    }
    let s = out_size / side;
    Ok(KnotAnnotation {
        cx: (knot.cx - x0) * s,
        cy: (knot.cy - y0) * s,
        rx: knot.rx * s,
        ry: knot.ry * s,
        theta: knot.theta,
    })
}

/// Inverse of [`reparameterize`]: crop coordinates back to the source image.
pub fn reparameterize_inverse(
    knot: &KnotAnnotation,
    x0: f64,
    y0: f64,
    side: f64,
    out_size: f64,
) -> Result<KnotAnnotation> {
    reparameterize(knot, -x0 * out_size / side, -y0 * out_size / side, out_size, side)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropPolicy {
    pub out_size: usize,
    /// Smallest crop side; default `⌈max_side / 2⌉`.
    pub min_side: Option<usize>,
    /// Largest crop side; default and upper bound `min(width, height)`.
    pub max_side: Option<usize>,
}

impl Default for CropPolicy {
    fn default() -> Self {
        CropPolicy {
            out_size: DEFAULT_OUT_SIZE,
            min_side: None,
            max_side: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropRecord {
    /// Image path of the source annotation.
    pub source: String,
    pub board_id: String,
    pub surface: Surface,
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
    pub out_size: usize,
    pub knots: Vec<KnotAnnotation>,
}

impl CropRecord {
    fn square(&self) -> AxisBox {
        AxisBox {
            x_min: self.x0 as f64,
            y_min: self.y0 as f64,
            x_max: (self.x0 + self.side) as f64,
            y_max: (self.y0 + self.side) as f64,
        }
    }
}

fn overlaps_open(a: &AxisBox, b: &AxisBox) -> bool {
    a.x_min < b.x_max && b.x_min < a.x_max && a.y_min < b.y_max && b.y_min < a.y_max
}

/// Random square crops, each overlapping at least one knot's bounding box.
///
/// Every crop first picks a knot, then a side in `[min_side, max_side]`, then
/// a position among those whose square still overlaps that knot's box. Knots
/// whose box misses the square are dropped; the rest are re-parameterized,
/// even when they protrude. Output depends only on `(seed, image_path)`.
pub fn generate_crops(
    img: &AnnotatedImage,
    count: usize,
    seed: u64,
    policy: &CropPolicy,
) -> Result<Vec<CropRecord>> {
    img.validate()?;
    if policy.out_size == 0 {
        return Err(Error::invalid("crop output size must be positive"));
    }
    let boxes = img.knot_boxes();
    if boxes.is_empty() || count == 0 {
        return Ok(Vec::new());
    }
    let limit = img.width.min(img.height);
    let max_side = policy.max_side.unwrap_or(limit).min(limit);
    let min_side = policy.min_side.unwrap_or(max_side.div_ceil(2)).max(1);
    if min_side > max_side {
        log::warn!(
            "{}: {}×{} image is smaller than the minimum crop side {min_side}; no crops",
            img.image_path,
            img.width,
            img.height
        );
        return Ok(Vec::new());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&img.image_path));
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count {
        attempts += 1;
        if attempts > count.saturating_mul(100) {
            log::warn!(
                "{}: only {} of {count} crops overlap a knot",
                img.image_path,
                out.len()
            );
            break;
        }
        let anchor = &boxes[rng.gen_range(0..boxes.len())];
        let side = rng.gen_range(min_side..=max_side);
        let x0 = pick_origin(&mut rng, anchor.x_min, anchor.x_max, side, img.width);
        let y0 = pick_origin(&mut rng, anchor.y_min, anchor.y_max, side, img.height);
        let mut rec = CropRecord {
            source: img.image_path.clone(),
            board_id: img.board_id.clone(),
            surface: img.surface,
            x0,
            y0,
            side,
            out_size: policy.out_size,
            knots: Vec::new(),
        };
        let square = rec.square();
        for (knot, bx) in img.knots.iter().zip(&boxes) {
            if overlaps_open(bx, &square) {
                rec.knots.push(reparameterize(
                    knot,
                    x0 as f64,
                    y0 as f64,
                    side as f64,
                    policy.out_size as f64,
                )?);
            }
        }
        if rec.knots.is_empty() {
            // Anchor box lies outside the frame.
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

/// Origin in `[0, extent − side]` such that `[o, o+side)` overlaps
/// `(lo, hi)`; falls back to the full range if that set is empty.
fn pick_origin(rng: &mut ChaCha8Rng, lo: f64, hi: f64, side: usize, extent: usize) -> usize {
    let last = extent - side;
    let from = ((lo - side as f64).floor() + 1.0).max(0.0) as usize;
    let to = (hi.ceil() - 1.0).min(last as f64);
    if to < from as f64 {
        return rng.gen_range(0..=last);
    }
    rng.gen_range(from..=to as usize)
}

/// Crops one annotated image to disk: `<stem>_crop<k>.png` plus a matching
/// single-image annotation file. Returns the annotation paths written.
pub fn write_crops(
    annotation_dir: &Path,
    img: &AnnotatedImage,
    crops: &[CropRecord],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if crops.is_empty() {
        return Ok(Vec::new());
    }
    let src = load_rgb(&img.resolve_image(annotation_dir))?;
    let stem = Path::new(&img.image_path)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| img.board_id.clone());
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::with_capacity(crops.len());
    for (k, c) in crops.iter().enumerate() {
        let name = format!("{stem}_crop{k:03}");
        let png = format!("{name}.png");
        let pixels = src.crop_resize(c.x0, c.y0, c.side, c.out_size)?;
        save_png(&pixels, &out_dir.join(&png))?;
        let ann = AnnotatedImage {
            image_path: png,
            width: c.out_size,
            height: c.out_size,
            board_id: c.board_id.clone(),
            surface: c.surface,
            knots: c.knots.clone(),
        };
        let path = out_dir.join(format!("{name}.json"));
        save_annotation(&ann, &path)?;
        written.push(path);
    }
    Ok(written)
}
