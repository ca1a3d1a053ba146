use serde::{Deserialize, Serialize};

use super::{GrayImage, VisionError};

pub const FAST_THRESHOLD: i32 = 20;
const ARC: usize = 9;

/// Bresenham circle of radius 3, clockwise from 12 o'clock.
const CIRCLE: [(isize, isize); 16] = [
    (0, -3),
    (1, -3),
    (2, -2),
    (3, -1),
    (3, 0),
    (3, 1),
    (2, 2),
    (1, 3),
    (0, 3),
    (-1, 3),
    (-2, 2),
    (-3, 1),
    (-3, 0),
    (-3, -1),
    (-2, -2),
    (-1, -3),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerPoint {
    pub x: f64,
    pub y: f64,
    pub score: f64,
}

/// Sum of `|p - c|` over the best run of at least [`ARC`] circle pixels all
/// brighter than `c + t` or all darker than `c - t`; `None` if no run qualifies.
fn segment_score(img: &GrayImage, x: usize, y: usize, t: i32) -> Option<f64> {
    let c = img.get(x, y) as i32;
    let ring: Vec<i32> = CIRCLE.iter().map(|&(dx, dy)| img.get((x as isize + dx) as usize, (y as isize + dy) as usize) as i32).collect();
    let mut best: Option<f64> = None;
    for sign in [1, -1] {
        let hit = |p: i32| if sign > 0 { p > c + t } else { p < c - t };
        if ring.iter().all(|&p| hit(p)) {
            let s = ring.iter().map(|p| (p - c).abs() as f64).sum();
            best = Some(best.map_or(s, |b: f64| b.max(s)));
            continue;
        }
        // Start right after a miss so circular runs are never split.
        let start = (0..16).find(|&i| !hit(ring[i])).expect("some pixel misses");
        let (mut len, mut sum) = (0usize, 0.0);
        for k in 1..=16 {
            let p = ring[(start + k) % 16];
            if hit(p) {
                len += 1;
                sum += (p - c).abs() as f64;
            } else {
                if len >= ARC {
                    best = Some(best.map_or(sum, |b: f64| b.max(sum)));
                }
                len = 0;
                sum = 0.0;
            }
        }
    }
    best
}

/// FAST-9 segment test on every pixel with a 3-pixel margin, optionally with 3x3 non-maximum suppression.
pub fn fast_corners(img: &GrayImage, t: i32, nonmax: bool) -> Result<Vec<CornerPoint>, VisionError> {
    if t <= 0 {
        return Err(VisionError::InvalidConfig(format!("FAST threshold must be positive, got {t}")));
    }
    if img.width < 7 || img.height < 7 {
        return Ok(Vec::new());
    }
    let mut scores = vec![0.0f64; img.width * img.height];
    let mut found = Vec::new();
    for y in 3..img.height - 3 {
        for x in 3..img.width - 3 {
            if let Some(s) = segment_score(img, x, y, t) {
                scores[y * img.width + x] = s;
                found.push((x, y, s));
            }
        }
    }
    let keep = |x: usize, y: usize, s: f64| -> bool {
        if !nonmax {
            return true;
        }
        let here = y * img.width + x;
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let (nx, ny) = ((x as isize + dx) as usize, (y as isize + dy) as usize);
                let there = ny * img.width + nx;
                let q = scores[there];
                // Equal scores go to the earlier pixel in raster order.
                if q > s || (q == s && q > 0.0 && there < here) {
                    return false;
                }
            }
        }
        true
    };
    Ok(found.into_iter().filter(|&(x, y, s)| keep(x, y, s)).map(|(x, y, s)| CornerPoint { x: x as f64, y: y as f64, score: s }).collect())
}
