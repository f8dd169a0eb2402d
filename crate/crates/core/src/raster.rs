//! Row-major 8-bit rasters and PNG I/O.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "gray buffer has {} pixels, expected {width}×{height}",
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn column(&self, x: usize) -> Vec<u8> {
        (0..self.height).map(|y| self.get(x, y)).collect()
    }
}

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<Rgb>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<Rgb>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::invalid(format!(
                "rgb buffer has {} pixels, expected {width}×{height}",
                data.len()
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: Rgb) -> Self {
        RgbImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: Rgb) {
        self.data[y * self.width + x] = v;
    }

    pub fn from_gray(g: &GrayImage) -> Self {
        RgbImage {
            width: g.width,
            height: g.height,
            data: g.data.iter().map(|&v| [v, v, v]).collect(),
        }
    }

    fn to_dynamic(&self) -> image::RgbImage {
        let raw = self.data.iter().flatten().copied().collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw)
            .expect("buffer length checked on construction")
    }

    fn from_dynamic(img: image::RgbImage) -> Self {
        let (w, h) = img.dimensions();
        let data = img.pixels().map(|p| p.0).collect();
        RgbImage {
            width: w as usize,
            height: h as usize,
            data,
        }
    }

    /// Crops the square `[x0, x0+side) × [y0, y0+side)` and resamples it to
    /// `out_size × out_size` with a triangle filter.
    pub fn crop_resize(&self, x0: usize, y0: usize, side: usize, out_size: usize) -> Result<RgbImage> {
        if side == 0 || x0 + side > self.width || y0 + side > self.height {
            return Err(Error::invalid(format!(
                "crop ({x0}, {y0}, side {side}) outside {}×{} image",
                self.width, self.height
            )));
        }
        let src = self.to_dynamic();
        let view = image::imageops::crop_imm(&src, x0 as u32, y0 as u32, side as u32, side as u32).to_image();
        let out = image::imageops::resize(
            &view,
            out_size as u32,
            out_size as u32,
            image::imageops::FilterType::Triangle,
        );
        Ok(RgbImage::from_dynamic(out))
    }
}

pub fn load_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(RgbImage::from_dynamic(img.to_rgb8()))
}

pub fn image_dimensions(path: &Path) -> Result<(usize, usize)> {
    let (w, h) = image::image_dimensions(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok((w as usize, h as usize))
}

/// Encodes to PNG and writes through a temporary file in the same directory.
pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    img.to_dynamic()
        .write_to(&mut std::io::Cursor::new(&mut buf), image::ImageFormat::Png)
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
    write_atomic(path, &buf)
}

pub fn save_gray_png(img: &GrayImage, path: &Path) -> Result<()> {
    save_png(&RgbImage::from_gray(img), path)
}

/// Writes `bytes` to `path` via a sibling temp file and `rename`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}
