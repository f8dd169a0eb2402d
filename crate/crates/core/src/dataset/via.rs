//! Import of VGG Image Annotator (VIA) ellipse regions.
//!
//! Accepts a VIA project file (`_via_img_metadata`) or a plain region export
//! keyed by `filename + size`. VIA does not record image dimensions, so the
//! caller supplies them.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::schema::{AnnotatedImage, Surface};
use crate::ellipse::Ellipse;
use crate::error::{Error, Result};

#[derive(Debug, Deserialize)]
struct ViaImage {
    filename: String,
    #[serde(default)]
    regions: Value,
}

#[derive(Debug, Deserialize)]
struct ViaShape {
    name: String,
    #[serde(default)]
    cx: f64,
    #[serde(default)]
    cy: f64,
    #[serde(default)]
    rx: f64,
    #[serde(default)]
    ry: f64,
    #[serde(default)]
    r: f64,
    #[serde(default)]
    theta: f64,
}

/// Splits `<board>_<surface>.<ext>` into its parts. Names without a known
/// surface suffix map to the whole stem and `wide1`.
pub fn board_and_surface(filename: &str) -> (String, Surface) {
    let stem = Path::new(filename)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| filename.to_string());
    if let Some((board, tail)) = stem.rsplit_once('_') {
        if let Ok(surface) = tail.parse::<Surface>() {
            if !board.is_empty() {
                return (board.to_string(), surface);
            }
        }
    }
    (stem, Surface::default())
}

pub fn import_via(
    text: &str,
    source: &Path,
    dims: impl Fn(&str) -> Option<(usize, usize)>,
) -> Result<Vec<AnnotatedImage>> {
    let root: Value = serde_json::from_str(text).map_err(|e| Error::json(source, e))?;
    let meta = root.get("_via_img_metadata").unwrap_or(&root);
    let entries = meta
        .as_object()
        .ok_or_else(|| Error::invalid(format!("{}: VIA metadata is not an object", source.display())))?;

    let mut out = Vec::new();
    for (key, entry) in entries {
        let img: ViaImage = serde_json::from_value(entry.clone())
            .map_err(|e| Error::invalid(format!("{}: entry `{key}`: {e}", source.display())))?;
        let regions: Vec<&Value> = match &img.regions {
            Value::Array(v) => v.iter().collect(),
            Value::Object(m) => m.values().collect(),
            _ => Vec::new(),
        };
        let mut knots = Vec::new();
        for region in regions {
            let Some(shape) = region.get("shape_attributes") else {
                continue;
            };
            let shape: ViaShape = serde_json::from_value(shape.clone()).map_err(|e| {
                Error::invalid(format!("{}: {}: bad shape: {e}", source.display(), img.filename))
            })?;
            let knot = match shape.name.as_str() {
                "ellipse" => Ellipse::new(shape.cx, shape.cy, shape.rx, shape.ry, shape.theta)?,
                "circle" => Ellipse::new(shape.cx, shape.cy, shape.r, shape.r, 0.0)?,
                other => {
                    log::warn!("{}: skipping `{other}` region", img.filename);
                    continue;
                }
            };
            knots.push(knot);
        }
        let (width, height) = dims(&img.filename).ok_or_else(|| {
            Error::invalid(format!("{}: unknown size for image {}", source.display(), img.filename))
        })?;
        let (board_id, surface) = board_and_surface(&img.filename);
        let ann = AnnotatedImage {
            image_path: img.filename,
            width,
            height,
            board_id,
            surface,
            knots,
        };
        ann.validate()?;
        out.push(ann);
    }
    out.sort_by(|a, b| a.image_path.cmp(&b.image_path));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PROJECT: &str = r#"{
      "_via_settings": {},
      "_via_img_metadata": {
        "b12_narrow2.png1234": {
          "filename": "b12_narrow2.png", "size": 1234, "file_attributes": {},
          "regions": [
            {"shape_attributes": {"name": "ellipse", "cx": 40, "cy": 30, "rx": 12.5, "ry": 6, "theta": -0.4},
             "region_attributes": {}},
            {"shape_attributes": {"name": "rect", "x": 1, "y": 1, "width": 3, "height": 3},
             "region_attributes": {}},
            {"shape_attributes": {"name": "circle", "cx": 70, "cy": 20, "r": 4},
             "region_attributes": {}}
          ]
        },
        "plain.png9": {"filename": "plain.png", "size": 9, "regions": []}
      }
    }"#;

    #[test]
    fn imports_project_file() {
        let imgs = import_via(PROJECT, Path::new("via.json"), |_| Some((100, 50))).unwrap();
        assert_eq!(imgs.len(), 2);
        let b = &imgs[0];
        assert_eq!(b.image_path, "b12_narrow2.png");
        assert_eq!((b.board_id.as_str(), b.surface), ("b12", Surface::Narrow2));
        assert_eq!(b.knots.len(), 2);
        assert_eq!(b.knots[0], Ellipse::new(40.0, 30.0, 12.5, 6.0, -0.4).unwrap());
        assert_eq!(b.knots[1], Ellipse::circle(70.0, 20.0, 4.0));
        assert_eq!((imgs[1].board_id.as_str(), imgs[1].surface), ("plain", Surface::Wide1));
    }

    #[test]
    fn missing_dimensions_is_an_error() {
        assert!(import_via(PROJECT, Path::new("via.json"), |_| None).is_err());
        assert!(import_via("[1, 2]", Path::new("via.json"), |_| Some((1, 1))).is_err());
    }
}
