use serde::{Deserialize, Serialize};

use super::{CornerPoint, VisionError};

pub const ZONE_TOLERANCE_PX: f64 = 10.0;

/// A measured member between two image points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamSegment {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub length_px: f64,
    pub length_mm: f64,
    /// Acute angle to the image horizontal.
    pub inclination_deg: f64,
}

impl BeamSegment {
    pub fn new(start: [f64; 2], end: [f64; 2], scale: f64) -> Result<Self, VisionError> {
        let length_mm = segment_length(start, end, scale)?;
        Ok(Self {
            start,
            end,
            length_px: dist(start, end),
            length_mm,
            inclination_deg: segment_angle(slope(start, end), Some(0.0)),
        })
    }

    pub fn slope(&self) -> Option<f64> {
        slope(self.start, self.end)
    }
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// `dy/dx`, or `None` for a vertical segment.
pub fn slope(a: [f64; 2], b: [f64; 2]) -> Option<f64> {
    let dx = b[0] - a[0];
    if dx.abs() < 1e-12 {
        None
    } else {
        Some((b[1] - a[1]) / dx)
    }
}

/// Acute angle in degrees between two lines given by slope (`None` = vertical).
pub fn segment_angle(m1: Option<f64>, m2: Option<f64>) -> f64 {
    match (m1, m2) {
        (None, None) => 0.0,
        (None, Some(m)) | (Some(m), None) => 90.0 - m.abs().atan().to_degrees(),
        (Some(a), Some(b)) => {
            let den = 1.0 + a * b;
            if den.abs() < 1e-12 {
                90.0
            } else {
                ((a - b) / den).abs().atan().to_degrees()
            }
        }
    }
}

/// Euclidean length in pixels times `scale` (mm per pixel).
pub fn segment_length(a: [f64; 2], b: [f64; 2], scale: f64) -> Result<f64, VisionError> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(VisionError::InvalidConfig(format!("scale factor must be positive, got {scale}")));
    }
    Ok(dist(a, b) * scale)
}

/// Keeps the best-scoring corner in each cell of a 3x3 grid over the image,
/// plus every corner within `tolerance` of the topmost or bottommost corner.
/// Input order is preserved.
pub fn zone_filter(corners: &[CornerPoint], dims: (usize, usize), tolerance: f64) -> Vec<CornerPoint> {
    if corners.is_empty() {
        return Vec::new();
    }
    let (w, h) = (dims.0.max(1) as f64, dims.1.max(1) as f64);
    let zone = |c: &CornerPoint| {
        let zx = ((3.0 * c.x / w).floor().max(0.0) as usize).min(2);
        let zy = ((3.0 * c.y / h).floor().max(0.0) as usize).min(2);
        zy * 3 + zx
    };
    let mut best: [Option<usize>; 9] = [None; 9];
    for (i, c) in corners.iter().enumerate() {
        let z = zone(c);
        if best[z].is_none_or(|b| c.score > corners[b].score) {
            best[z] = Some(i);
        }
    }
    let min_y = corners.iter().map(|c| c.y).fold(f64::INFINITY, f64::min);
    let max_y = corners.iter().map(|c| c.y).fold(f64::NEG_INFINITY, f64::max);
    corners
        .iter()
        .enumerate()
        .filter(|(i, c)| best.contains(&Some(*i)) || c.y - min_y <= tolerance || max_y - c.y <= tolerance)
        .map(|(_, c)| *c)
        .collect()
}

/// Links each corner to its two Manhattan-nearest neighbours (ties: smaller x,
/// then smaller y). Returns deduplicated index pairs `(i, j)` with `i < j`.
pub fn connect_nearest(corners: &[CornerPoint]) -> Result<Vec<(usize, usize)>, VisionError> {
    if corners.len() < 2 {
        return Err(VisionError::NoStructure(format!("{} corner(s), need at least 2", corners.len())));
    }
    let mut edges = Vec::new();
    for (i, a) in corners.iter().enumerate() {
        let mut others: Vec<usize> = (0..corners.len()).filter(|&j| j != i).collect();
        others.sort_by(|&p, &q| {
            let (cp, cq) = (&corners[p], &corners[q]);
            let dp = (cp.x - a.x).abs() + (cp.y - a.y).abs();
            let dq = (cq.x - a.x).abs() + (cq.y - a.y).abs();
            dp.total_cmp(&dq).then(cp.x.total_cmp(&cq.x)).then(cp.y.total_cmp(&cq.y))
        });
        for &j in others.iter().take(2) {
            let e = (i.min(j), i.max(j));
            if !edges.contains(&e) {
                edges.push(e);
            }
        }
    }
    edges.sort_unstable();
    Ok(edges)
}

/// Single-linkage clustering of corners within `radius`; each cluster becomes
/// one point at its score-weighted centroid carrying the summed score.
/// Clusters are ordered by (y, x) of their centroid.
pub fn cluster_corners(corners: &[CornerPoint], radius: f64) -> Vec<CornerPoint> {
    let n = corners.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&corners[i], &corners[j]);
            if (a.x - b.x).hypot(a.y - b.y) <= radius {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, (f64, f64, f64, usize)> = Default::default();
    for (i, c) in corners.iter().enumerate() {
        let r = find(&mut parent, i);
        let w = c.score.max(1e-9);
        let g = groups.entry(r).or_default();
        g.0 += w * c.x;
        g.1 += w * c.y;
        g.2 += w;
        g.3 += 1;
    }
    let mut out: Vec<CornerPoint> = groups.values().map(|&(sx, sy, w, _)| CornerPoint { x: sx / w, y: sy / w, score: w }).collect();
    out.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    out
}
