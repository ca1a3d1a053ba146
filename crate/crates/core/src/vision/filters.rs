use image::RgbImage;

use super::{GrayImage, ResponseGrid, VisionError};

pub const BLUR_SIGMA: f64 = 1.1;
pub const EDGE_THRESHOLD: i32 = 30;

/// Rounded ITU-R 601 luma.
pub fn to_grayscale(rgb: &RgbImage) -> Result<GrayImage, VisionError> {
    let (w, h) = rgb.dimensions();
    if w == 0 || h == 0 {
        return Err(VisionError::InvalidImage("empty image".into()));
    }
    let data = rgb
        .pixels()
        .map(|p| {
            let [r, g, b] = p.0;
            (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    GrayImage::new(w as usize, h as usize, data)
}

/// Normalized 5x5 Gaussian with σ = [`BLUR_SIGMA`], row-major.
pub fn gaussian_kernel() -> [[f64; 5]; 5] {
    let mut k = [[0.0; 5]; 5];
    let mut sum = 0.0;
    for (i, row) in k.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            let (dy, dx) = (i as f64 - 2.0, j as f64 - 2.0);
            *v = (-(dx * dx + dy * dy) / (2.0 * BLUR_SIGMA * BLUR_SIGMA)).exp();
            sum += *v;
        }
    }
    k.iter_mut().flatten().for_each(|v| *v /= sum);
    k
}

/// 5x5 Gaussian blur with edge replication.
pub fn gaussian_blur(img: &GrayImage) -> Result<GrayImage, VisionError> {
    if img.width < 5 || img.height < 5 {
        return Err(VisionError::InvalidImage(format!("blur needs at least 5x5, got {}x{}", img.width, img.height)));
    }
    let k = gaussian_kernel();
    let mut out = vec![0u8; img.data.len()];
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for (i, row) in k.iter().enumerate() {
                for (j, w) in row.iter().enumerate() {
                    acc += w * img.get_clamped(x as isize + j as isize - 2, y as isize + i as isize - 2) as f64;
                }
            }
            out[y * img.width + x] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    GrayImage::new(img.width, img.height, out)
}

/// 4-neighbour Laplacian `[[0,1,0],[1,-4,1],[0,1,0]]` with edge replication.
pub fn laplacian(img: &GrayImage) -> ResponseGrid {
    let mut data = vec![0i16; img.data.len()];
    for y in 0..img.height as isize {
        for x in 0..img.width as isize {
            let c = img.get_clamped(x, y) as i16;
            let s = img.get_clamped(x - 1, y) as i16
                + img.get_clamped(x + 1, y) as i16
                + img.get_clamped(x, y - 1) as i16
                + img.get_clamped(x, y + 1) as i16;
            data[y as usize * img.width + x as usize] = s - 4 * c;
        }
    }
    ResponseGrid { width: img.width, height: img.height, data }
}

/// `255` where `|response| > threshold`, else `0`.
pub fn threshold_binary(response: &ResponseGrid, threshold: i32) -> GrayImage {
    let data = response.data.iter().map(|&r| if (r as i32).abs() > threshold { 255 } else { 0 }).collect();
    GrayImage { width: response.width, height: response.height, data }
}

/// 3x3 morphological closing (dilate then erode) of a binary mask.
pub fn close_mask(mask: &GrayImage) -> GrayImage {
    let pass = |img: &GrayImage, pick: fn(u8, u8) -> u8, init: u8| {
        let mut out = img.clone();
        for y in 0..img.height as isize {
            for x in 0..img.width as isize {
                let mut v = init;
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        v = pick(v, img.get_clamped(x + dx, y + dy));
                    }
                }
                out.set(x as usize, y as usize, v);
            }
        }
        out
    };
    let dilated = pass(mask, u8::max, 0);
    pass(&dilated, u8::min, 255)
}
