use std::path::Path;

use image::{Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use super::{
    close_mask, cluster_corners, fast_corners, gaussian_blur, laplacian, segment_angle, threshold_binary, to_grayscale, zone_filter, BeamSegment,
    CornerPoint, GrayImage, VisionError, EDGE_THRESHOLD, FAST_THRESHOLD, ZONE_TOLERANCE_PX,
};

pub const STAGE_FILES: [&str; 7] = [
    "stage1_gray.png",
    "stage2_blur.png",
    "stage3_laplacian.png",
    "stage4_threshold.png",
    "stage5_corners.png",
    "stage6_zones.png",
    "stage7_angles.png",
];

/// Collinear continuations below this angle are not reported as joints.
const COLLINEAR_DEG: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub fast_threshold: i32,
    pub nonmax_suppression: bool,
    pub edge_threshold: i32,
    pub zone_tolerance_px: f64,
    /// Corners closer than this belong to the same joint.
    pub joint_radius_px: f64,
    /// Gray levels below this count as ink.
    pub ink_threshold: u8,
    pub ink_radius_px: usize,
    /// Fraction of a candidate member that must lie on ink.
    pub min_support: f64,
    pub keep_stages: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fast_threshold: FAST_THRESHOLD,
            nonmax_suppression: true,
            edge_threshold: EDGE_THRESHOLD,
            zone_tolerance_px: ZONE_TOLERANCE_PX,
            joint_radius_px: 20.0,
            ink_threshold: 128,
            ink_radius_px: 4,
            min_support: 0.9,
            keep_stages: false,
        }
    }
}

impl PipelineConfig {
    fn validate(&self) -> Result<(), VisionError> {
        let bad = |m: &str| Err(VisionError::InvalidConfig(m.into()));
        if self.fast_threshold <= 0 {
            return bad("fast_threshold must be positive");
        }
        if !(self.joint_radius_px > 0.0) {
            return bad("joint_radius_px must be positive");
        }
        if !(self.min_support > 0.0 && self.min_support <= 1.0) {
            return bad("min_support must be in (0, 1]");
        }
        if !(self.zone_tolerance_px >= 0.0) {
            return bad("zone_tolerance_px must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageImages {
    pub gray: image::GrayImage,
    pub blur: image::GrayImage,
    pub laplacian: image::GrayImage,
    pub threshold: image::GrayImage,
    pub corners: RgbImage,
    pub zones: RgbImage,
    pub angles: RgbImage,
}

impl StageImages {
    /// Writes the seven [`STAGE_FILES`] into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), VisionError> {
        std::fs::create_dir_all(dir)?;
        let save = |name: &str, r: image::ImageResult<()>| r.map_err(|e| VisionError::Io(std::io::Error::other(format!("{name}: {e}"))));
        save(STAGE_FILES[0], self.gray.save(dir.join(STAGE_FILES[0])))?;
        save(STAGE_FILES[1], self.blur.save(dir.join(STAGE_FILES[1])))?;
        save(STAGE_FILES[2], self.laplacian.save(dir.join(STAGE_FILES[2])))?;
        save(STAGE_FILES[3], self.threshold.save(dir.join(STAGE_FILES[3])))?;
        save(STAGE_FILES[4], self.corners.save(dir.join(STAGE_FILES[4])))?;
        save(STAGE_FILES[5], self.zones.save(dir.join(STAGE_FILES[5])))?;
        save(STAGE_FILES[6], self.angles.save(dir.join(STAGE_FILES[6])))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractedParameters {
    pub beam_count: usize,
    pub beam_lengths_mm: Vec<f64>,
    pub total_length_mm: f64,
    pub mean_length_mm: f64,
    /// Mean of `angles_deg`; 0 when no two members meet at an angle.
    pub mean_angle_deg: f64,
    /// Acute angle for every pair of members sharing a joint.
    pub angles_deg: Vec<f64>,
    pub scale_factor: f64,
    pub corner_count: usize,
    pub joints: Vec<[f64; 2]>,
    pub segments: Vec<BeamSegment>,
    #[serde(skip)]
    pub stages: Option<StageImages>,
}

/// Joint-and-member graph recovered from the drawing.
struct Frame {
    joints: Vec<[f64; 2]>,
    members: Vec<(usize, usize)>,
}

/// Runs the full pipeline on an RGB image; `scale` is millimetres per pixel.
pub fn extract_parameters(rgb: &RgbImage, scale: f64, config: &PipelineConfig) -> Result<ExtractedParameters, VisionError> {
    config.validate()?;
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(VisionError::InvalidConfig(format!("scale factor must be positive, got {scale}")));
    }
    let gray = to_grayscale(rgb)?;
    if gray.width < super::MIN_IMAGE_SIDE || gray.height < super::MIN_IMAGE_SIDE {
        return Err(VisionError::InvalidImage(format!("image is {}x{}", gray.width, gray.height)));
    }
    let blurred = gaussian_blur(&gray)?;
    let response = laplacian(&blurred);
    let mask = close_mask(&threshold_binary(&response, config.edge_threshold));
    let corners = fast_corners(&mask, config.fast_threshold, config.nonmax_suppression)?;
    if corners.is_empty() {
        return Err(VisionError::NoStructure("no corners detected".into()));
    }
    let clusters = cluster_corners(&corners, config.joint_radius_px);
    let candidates = zone_filter(&clusters, (gray.width, gray.height), config.zone_tolerance_px);
    if candidates.len() < 2 {
        return Err(VisionError::NoStructure(format!("{} joint candidate(s)", candidates.len())));
    }
    let ink = InkMap::new(&gray, config.ink_threshold, config.ink_radius_px);
    let mut frame = link_joints(&candidates, &ink, config);
    prune(&mut frame);
    if frame.members.is_empty() {
        return Err(VisionError::NoStructure("no ink-supported members between joints".into()));
    }
    refine_joints(&mut frame, &ink, config);

    let segments = frame
        .members
        .iter()
        .map(|&(a, b)| BeamSegment::new(frame.joints[a], frame.joints[b], scale))
        .collect::<Result<Vec<_>, _>>()?;
    let mut angles_deg = Vec::new();
    for j in 0..frame.joints.len() {
        let incident: Vec<usize> = (0..segments.len()).filter(|&m| frame.members[m].0 == j || frame.members[m].1 == j).collect();
        for (i, &p) in incident.iter().enumerate() {
            for &q in &incident[i + 1..] {
                let a = segment_angle(segments[p].slope(), segments[q].slope());
                if a > COLLINEAR_DEG {
                    angles_deg.push(a);
                }
            }
        }
    }
    let beam_lengths_mm: Vec<f64> = segments.iter().map(|s| s.length_mm).collect();
    let total_length_mm: f64 = beam_lengths_mm.iter().sum();
    let mean_angle_deg = if angles_deg.is_empty() { 0.0 } else { angles_deg.iter().sum::<f64>() / angles_deg.len() as f64 };

    let stages = config.keep_stages.then(|| StageImages {
        gray: gray.to_image(),
        blur: blurred.to_image(),
        laplacian: response.to_image(),
        threshold: mask.to_image(),
        corners: mark_points(rgb, &corners, Rgb([255, 0, 0]), 2),
        zones: mark_points(rgb, &candidates, Rgb([0, 160, 0]), 5),
        angles: draw_segments(rgb, &segments, &frame.joints),
    });

    Ok(ExtractedParameters {
        beam_count: segments.len(),
        mean_length_mm: total_length_mm / segments.len() as f64,
        total_length_mm,
        beam_lengths_mm,
        mean_angle_deg,
        angles_deg,
        scale_factor: scale,
        corner_count: corners.len(),
        joints: frame.joints,
        segments,
        stages,
    })
}

/// Pixels within `radius` (Chebyshev) of a dark pixel.
struct InkMap {
    width: usize,
    height: usize,
    dark: Vec<bool>,
    near: Vec<bool>,
}

impl InkMap {
    fn new(gray: &GrayImage, threshold: u8, radius: usize) -> Self {
        let (w, h) = (gray.width, gray.height);
        let dark: Vec<bool> = gray.data.iter().map(|&v| v < threshold).collect();
        let r = radius as isize;
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let lo = (x as isize - r).max(0) as usize;
                let hi = ((x as isize + r) as usize).min(w - 1);
                rows[y * w + x] = (lo..=hi).any(|k| dark[y * w + k]);
            }
        }
        let mut near = vec![false; w * h];
        for y in 0..h {
            let lo = (y as isize - r).max(0) as usize;
            let hi = ((y as isize + r) as usize).min(h - 1);
            for x in 0..w {
                near[y * w + x] = (lo..=hi).any(|k| rows[k * w + x]);
            }
        }
        Self { width: w, height: h, dark, near }
    }

    fn near_at(&self, p: [f64; 2]) -> bool {
        let (x, y) = (p[0].round(), p[1].round());
        if x < 0.0 || y < 0.0 || x >= self.width as f64 || y >= self.height as f64 {
            return false;
        }
        self.near[y as usize * self.width + x as usize]
    }

    /// Share of the middle of segment `a`-`b` lying near ink. The ends are
    /// skipped because they sit inside joints.
    fn support(&self, a: [f64; 2], b: [f64; 2]) -> f64 {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let n = (len * 0.6).ceil().max(1.0) as usize;
        let hits = (0..=n)
            .filter(|&i| {
                let t = 0.2 + 0.6 * i as f64 / n as f64;
                self.near_at([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])])
            })
            .count();
        hits as f64 / (n + 1) as f64
    }
}

/// Projection parameter of `p` on `a`-`b` and its distance from the line.
fn project(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = ((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2;
    let d = ((p[0] - a[0]) * dy - (p[1] - a[1]) * dx).abs() / len2.sqrt();
    (t, d)
}

/// Whether joints `a` and `b` are joined by a straight run of ink. Joint
/// estimates can sit off the member, so the test follows the ink centre line
/// fitted between them rather than the raw chord.
fn is_member(a: [f64; 2], b: [f64; 2], ink: &InkMap, config: &PipelineConfig) -> bool {
    let (c, d) = fit_centre_line(a, b, ink, config.joint_radius_px);
    let off = |p: [f64; 2]| ((p[0] - c[0]) * d[1] - (p[1] - c[1]) * d[0]).abs();
    if off(a) > config.joint_radius_px || off(b) > config.joint_radius_px {
        return false;
    }
    let on_line = |p: [f64; 2]| {
        let t = (p[0] - c[0]) * d[0] + (p[1] - c[1]) * d[1];
        [c[0] + t * d[0], c[1] + t * d[1]]
    };
    ink.support(on_line(a), on_line(b)) >= config.min_support
}

fn link_joints(candidates: &[CornerPoint], ink: &InkMap, config: &PipelineConfig) -> Frame {
    let joints: Vec<[f64; 2]> = candidates.iter().map(|c| [c.x, c.y]).collect();
    let n = joints.len();
    let mut linked = vec![false; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (joints[i], joints[j]);
            let len = (a[0] - b[0]).hypot(a[1] - b[1]);
            if len > 2.0 * config.joint_radius_px && is_member(a, b, ink, config) {
                linked[i * n + j] = true;
                linked[j * n + i] = true;
            }
        }
    }
    // A link that runs through an intermediate joint linked to both ends is
    // two members, not one.
    let mut members = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if !linked[i * n + j] {
                continue;
            }
            let spans = (0..n).any(|k| {
                if k == i || k == j || !linked[i * n + k] || !linked[k * n + j] {
                    return false;
                }
                let (t, d) = project(joints[k], joints[i], joints[j]);
                t > 0.0 && t < 1.0 && d <= config.joint_radius_px
            });
            if !spans {
                members.push((i, j));
            }
        }
    }
    Frame { joints, members }
}

/// Drops isolated joints and dissolves joints where exactly two collinear members meet.
fn prune(frame: &mut Frame) {
    loop {
        let n = frame.joints.len();
        let degree = |j: usize, m: &[(usize, usize)]| m.iter().filter(|e| e.0 == j || e.1 == j).count();
        let straight = (0..n).find(|&j| {
            let inc: Vec<&(usize, usize)> = frame.members.iter().filter(|e| e.0 == j || e.1 == j).collect();
            if inc.len() != 2 {
                return false;
            }
            let other = |e: &(usize, usize)| if e.0 == j { e.1 } else { e.0 };
            let (p, q) = (frame.joints[other(inc[0])], frame.joints[other(inc[1])]);
            let c = frame.joints[j];
            let m1 = super::slope(p, c);
            let m2 = super::slope(c, q);
            let (t, _) = project(c, p, q);
            segment_angle(m1, m2) < COLLINEAR_DEG && t > 0.0 && t < 1.0
        });
        if let Some(j) = straight {
            let ends: Vec<usize> = frame.members.iter().filter(|e| e.0 == j || e.1 == j).map(|e| if e.0 == j { e.1 } else { e.0 }).collect();
            frame.members.retain(|e| e.0 != j && e.1 != j);
            let e = (ends[0].min(ends[1]), ends[0].max(ends[1]));
            if !frame.members.contains(&e) {
                frame.members.push(e);
            }
            continue;
        }
        let keep: Vec<bool> = (0..n).map(|j| degree(j, &frame.members) > 0).collect();
        if keep.iter().all(|&k| k) {
            break;
        }
        let mut remap = vec![usize::MAX; n];
        let mut joints = Vec::new();
        for j in 0..n {
            if keep[j] {
                remap[j] = joints.len();
                joints.push(frame.joints[j]);
            }
        }
        frame.joints = joints;
        for e in &mut frame.members {
            *e = (remap[e.0], remap[e.1]);
        }
    }
    frame.members.sort_unstable();
}

/// Centre line of a member as (point, unit direction), fitted to the ink in
/// the middle of the segment by principal axis.
fn fit_centre_line(a: [f64; 2], b: [f64; 2], ink: &InkMap, corridor: f64) -> ([f64; 2], [f64; 2]) {
    let fallback = {
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        ([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0], [(b[0] - a[0]) / len, (b[1] - a[1]) / len])
    };
    let x0 = (a[0].min(b[0]) - corridor).floor().max(0.0) as usize;
    let x1 = ((a[0].max(b[0]) + corridor).ceil() as usize).min(ink.width - 1);
    let y0 = (a[1].min(b[1]) - corridor).floor().max(0.0) as usize;
    let y1 = ((a[1].max(b[1]) + corridor).ceil() as usize).min(ink.height - 1);
    let mut pts = Vec::new();
    for y in y0..=y1 {
        for x in x0..=x1 {
            if !ink.dark[y * ink.width + x] {
                continue;
            }
            let (t, d) = project([x as f64, y as f64], a, b);
            if (0.2..=0.8).contains(&t) && d <= corridor {
                pts.push([x as f64, y as f64]);
            }
        }
    }
    if pts.len() < 10 {
        return fallback;
    }
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (dx, dy) = (p[0] - cx, p[1] - cy);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let theta = 0.5 * (2.0 * sxy).atan2(sxx - syy);
    let mut dir = [theta.cos(), theta.sin()];
    if dir[0] * fallback.1[0] + dir[1] * fallback.1[1] < 0.0 {
        dir = [-dir[0], -dir[1]];
    }
    ([cx, cy], dir)
}

/// Moves each joint to the least-squares meeting point of its members' centre lines.
fn refine_joints(frame: &mut Frame, ink: &InkMap, config: &PipelineConfig) {
    let lines: Vec<([f64; 2], [f64; 2])> =
        frame.members.iter().map(|&(a, b)| fit_centre_line(frame.joints[a], frame.joints[b], ink, config.joint_radius_px / 2.0)).collect();
    let refined: Vec<[f64; 2]> = (0..frame.joints.len())
        .map(|j| {
            let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (m, &(p, q)) in frame.members.iter().enumerate() {
                if p != j && q != j {
                    continue;
                }
                let (c, d) = lines[m];
                // Projector onto the line normal: I - d dᵀ.
                let (n11, n12, n22) = (1.0 - d[0] * d[0], -d[0] * d[1], 1.0 - d[1] * d[1]);
                a11 += n11;
                a12 += n12;
                a22 += n22;
                b1 += n11 * c[0] + n12 * c[1];
                b2 += n12 * c[0] + n22 * c[1];
            }
            let det = a11 * a22 - a12 * a12;
            if det.abs() < 1e-3 {
                return frame.joints[j];
            }
            [(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det]
        })
        .collect();
    frame.joints = refined;
}

fn mark_points(base: &RgbImage, pts: &[CornerPoint], colour: Rgb<u8>, r: i64) -> RgbImage {
    let mut img = base.clone();
    let (w, h) = (img.width() as i64, img.height() as i64);
    for p in pts {
        let (cx, cy) = (p.x.round() as i64, p.y.round() as i64);
        for d in -r..=r {
            for (x, y) in [(cx + d, cy), (cx, cy + d)] {
                if (0..w).contains(&x) && (0..h).contains(&y) {
                    img.put_pixel(x as u32, y as u32, colour);
                }
            }
        }
    }
    img
}

fn draw_segments(base: &RgbImage, segments: &[BeamSegment], joints: &[[f64; 2]]) -> RgbImage {
    let mut img = base.clone();
    let (w, h) = (img.width() as f64, img.height() as f64);
    for s in segments {
        let steps = s.length_px.ceil().max(1.0) as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let (x, y) = ((s.start[0] + t * (s.end[0] - s.start[0])).round(), (s.start[1] + t * (s.end[1] - s.start[1])).round());
            if x >= 0.0 && y >= 0.0 && x < w && y < h {
                img.put_pixel(x as u32, y as u32, Rgb([0, 90, 255]));
            }
        }
    }
    let marks: Vec<CornerPoint> = joints.iter().map(|j| CornerPoint { x: j[0], y: j[1], score: 0.0 }).collect();
    mark_points(&img, &marks, Rgb([255, 0, 0]), 4)
}

#[cfg(test)]
mod tests {
    use super::super::render::{reference_designs, render};
    use super::*;

    #[test]
    fn blank_image_has_no_structure() {
        let img = RgbImage::from_pixel(64, 64, Rgb([255, 255, 255]));
        assert!(matches!(extract_parameters(&img, 1.0, &PipelineConfig::default()), Err(VisionError::NoStructure(_))));
    }

    #[test]
    fn rejects_bad_scale_and_config() {
        let img = render(&reference_designs()[3], 4.0);
        assert!(matches!(extract_parameters(&img, 0.0, &PipelineConfig::default()), Err(VisionError::InvalidConfig(_))));
        let cfg = PipelineConfig { fast_threshold: 0, ..Default::default() };
        assert!(matches!(extract_parameters(&img, 1.0, &cfg), Err(VisionError::InvalidConfig(_))));
    }

    #[test]
    fn king_post_is_recovered_deterministically() {
        let d = &reference_designs()[3];
        let img = render(d, 4.0);
        let a = extract_parameters(&img, 0.5, &PipelineConfig::default()).unwrap();
        let b = extract_parameters(&img, 0.5, &PipelineConfig::default()).unwrap();
        assert_eq!(a.beam_count, d.members.len());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let mut truth: Vec<f64> = d.member_lengths_px().iter().map(|l| l * 0.5).collect();
        let mut got = a.beam_lengths_mm.clone();
        truth.sort_by(f64::total_cmp);
        got.sort_by(f64::total_cmp);
        for (t, g) in truth.iter().zip(&got) {
            assert!((t - g).abs() / t < 0.05, "{truth:?} {got:?}");
        }
    }
}
