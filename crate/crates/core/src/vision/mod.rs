//! Beam extraction from bridge images: grayscale, blur, Laplacian edges,
//! FAST corners, zone filtering and segment measurement.

mod fast;
mod filters;
mod graph;
mod pipeline;
pub mod render;

use std::path::Path;

use image::RgbImage;
use thiserror::Error;

pub use fast::{fast_corners, CornerPoint, FAST_THRESHOLD};
pub use filters::{close_mask, gaussian_blur, gaussian_kernel, laplacian, threshold_binary, to_grayscale, BLUR_SIGMA, EDGE_THRESHOLD};
pub use graph::{cluster_corners, connect_nearest, segment_angle, segment_length, slope, zone_filter, BeamSegment, ZONE_TOLERANCE_PX};
pub use pipeline::{extract_parameters, ExtractedParameters, PipelineConfig, StageImages, STAGE_FILES};

pub const MIN_IMAGE_SIDE: usize = 8;

#[derive(Debug, Error)]
pub enum VisionError {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no structure found: {0}")]
    NoStructure(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// 8-bit single-channel raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self, VisionError> {
        if data.len() != width * height {
            return Err(VisionError::InvalidImage(format!("{} bytes for {width}x{height}", data.len())));
        }
        if width == 0 || height == 0 {
            return Err(VisionError::InvalidImage("empty image".into()));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    /// Read with coordinates clamped to the border (edge replication).
    pub fn get_clamped(&self, x: isize, y: isize) -> u8 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.get(x, y)
    }

    pub fn to_image(&self) -> image::GrayImage {
        image::GrayImage::from_raw(self.width as u32, self.height as u32, self.data.clone()).expect("dimensions match")
    }
}

/// Signed filter response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResponseGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<i16>,
}

impl ResponseGrid {
    pub fn get(&self, x: usize, y: usize) -> i16 {
        self.data[y * self.width + x]
    }

    /// Maps |response| to brightness for inspection.
    pub fn to_image(&self) -> image::GrayImage {
        let max = self.data.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0).max(1) as f64;
        let data = self.data.iter().map(|v| (v.unsigned_abs() as f64 / max * 255.0).round() as u8).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, data).expect("dimensions match")
    }
}

/// Decodes PNG or binary PPM bytes.
pub fn decode_image(bytes: &[u8]) -> Result<RgbImage, VisionError> {
    let img = image::load_from_memory(bytes).map_err(|e| VisionError::InvalidImage(e.to_string()))?;
    let rgb = img.to_rgb8();
    check_dimensions(&rgb)?;
    Ok(rgb)
}

pub fn load_image(path: &Path) -> Result<RgbImage, VisionError> {
    decode_image(&std::fs::read(path)?)
}

fn check_dimensions(rgb: &RgbImage) -> Result<(), VisionError> {
    let (w, h) = rgb.dimensions();
    if (w as usize) < MIN_IMAGE_SIDE || (h as usize) < MIN_IMAGE_SIDE {
        return Err(VisionError::InvalidImage(format!("image is {w}x{h}, need at least {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decode_rejects_garbage_and_tiny() {
        assert!(matches!(decode_image(b"not an image"), Err(VisionError::InvalidImage(_))));
        let mut buf = std::io::Cursor::new(Vec::new());
        RgbImage::new(4, 4).write_to(&mut buf, image::ImageFormat::Png).unwrap();
        assert!(matches!(decode_image(buf.get_ref()), Err(VisionError::InvalidImage(_))));
    }

    #[test]
    fn decode_ppm() {
        let mut bytes = b"P6\n8 8\n255\n".to_vec();
        bytes.extend(std::iter::repeat_n(200u8, 8 * 8 * 3));
        let img = decode_image(&bytes).unwrap();
        assert_eq!(img.dimensions(), (8, 8));
        assert_eq!(img.get_pixel(3, 3).0, [200, 200, 200]);
    }
}
