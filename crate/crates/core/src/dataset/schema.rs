use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ellipse::{ellipse_bbox, Ellipse};
use crate::error::{Error, Result};
use crate::raster::write_atomic;

/// A ground-truth knot face. Same parameterization as [`Ellipse`].
pub type KnotAnnotation = Ellipse;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Surface {
    #[default]
    Wide1,
    Wide2,
    Narrow1,
    Narrow2,
}

impl Surface {
    pub const ALL: [Surface; 4] = [Surface::Wide1, Surface::Wide2, Surface::Narrow1, Surface::Narrow2];

    pub fn as_str(self) -> &'static str {
        match self {
            Surface::Wide1 => "wide1",
            Surface::Wide2 => "wide2",
            Surface::Narrow1 => "narrow1",
            Surface::Narrow2 => "narrow2",
        }
    }
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Surface {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Surface::ALL
            .into_iter()
            .find(|v| v.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown surface `{s}`")))
    }
}

/// One image and its knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedImage {
    /// Image path, relative to the annotation file's directory unless absolute.
    #[serde(rename = "image")]
    pub image_path: String,
    pub width: usize,
    pub height: usize,
    pub board_id: String,
    pub surface: Surface,
    #[serde(default)]
    pub knots: Vec<KnotAnnotation>,
}

impl AnnotatedImage {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::invalid(format!(
                "{}: image size must be positive, got {}×{}",
                self.image_path, self.width, self.height
            )));
        }
        if self.board_id.is_empty() {
            return Err(Error::invalid(format!("{}: empty board_id", self.image_path)));
        }
        for (i, k) in self.knots.iter().enumerate() {
            k.validate()
                .map_err(|e| Error::invalid(format!("{}: knot {i}: {e}", self.image_path)))?;
            let slack = k.rx + k.ry;
            let inside = (-slack..=self.width as f64 + slack).contains(&k.cx)
                && (-slack..=self.height as f64 + slack).contains(&k.cy);
            if !inside {
                return Err(Error::invalid(format!(
                    "{}: knot {i} center ({}, {}) is outside the image",
                    self.image_path, k.cx, k.cy
                )));
            }
        }
        Ok(())
    }

    /// Bounding boxes of all knots.
    pub fn knot_boxes(&self) -> Vec<crate::ellipse::AxisBox> {
        self.knots.iter().filter_map(|k| ellipse_bbox(k).ok()).collect()
    }

    pub fn resolve_image(&self, annotation_dir: &Path) -> PathBuf {
        let p = Path::new(&self.image_path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            annotation_dir.join(p)
        }
    }
}

/// The aggregated form: `{"images": [...]}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AnnotationFile {
    pub images: Vec<AnnotatedImage>,
}

/// Parses either a single-image document or an aggregated `images` file.
/// Schema errors carry the file position and name the field.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotatedImage>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_annotations(&text, path)
}

pub(crate) fn parse_annotations(text: &str, path: &Path) -> Result<Vec<AnnotatedImage>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json(path, e))?;
    let images = if value.get("images").is_some() {
        serde_json::from_str::<AnnotationFile>(text)
            .map_err(|e| Error::json(path, e))?
            .images
    } else {
        vec![serde_json::from_str::<AnnotatedImage>(text).map_err(|e| Error::json(path, e))?]
    };
    for img in &images {
        img.validate().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            column: 0,
            message: e.to_string(),
        })?;
    }
    Ok(images)
}

/// Loads every `*.json` in `dir` (sorted by name). Each entry is paired with
/// the directory its image path is relative to.
pub fn load_annotation_dir(dir: &Path) -> Result<Vec<(PathBuf, AnnotatedImage)>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let mut out = Vec::new();
    for f in files {
        let base = f.parent().unwrap_or(dir).to_path_buf();
        for img in load_annotations(&f)? {
            out.push((base.clone(), img));
        }
    }
    Ok(out)
}

pub fn save_annotation(img: &AnnotatedImage, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(img).expect("annotation serializes");
    write_atomic(path, text.as_bytes())
}
