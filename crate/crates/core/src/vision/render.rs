//! Synthetic truss drawings with known geometry, for exercising extraction.

use image::{Rgb, RgbImage};

use super::segment_angle;
use super::slope;

#[derive(Debug, Clone, PartialEq)]
pub struct TrussDesign {
    pub name: &'static str,
    pub width: u32,
    pub height: u32,
    pub nodes: Vec<[f64; 2]>,
    pub members: Vec<(usize, usize)>,
}

/// Acute angle between two members meeting at `node`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IncludedAngle {
    pub node: usize,
    pub first: usize,
    pub second: usize,
    pub degrees: f64,
}

impl TrussDesign {
    pub fn member_lengths_px(&self) -> Vec<f64> {
        self.members.iter().map(|&(a, b)| member_length(self.nodes[a], self.nodes[b])).collect()
    }

    pub fn member_endpoints(&self, m: usize) -> ([f64; 2], [f64; 2]) {
        let (a, b) = self.members[m];
        (self.nodes[a], self.nodes[b])
    }

    /// Every pair of members sharing a node, skipping collinear continuations.
    pub fn included_angles(&self) -> Vec<IncludedAngle> {
        let mut out = Vec::new();
        for node in 0..self.nodes.len() {
            let incident: Vec<usize> = (0..self.members.len()).filter(|&m| self.members[m].0 == node || self.members[m].1 == node).collect();
            for (i, &first) in incident.iter().enumerate() {
                for &second in &incident[i + 1..] {
                    let (a0, a1) = self.member_endpoints(first);
                    let (b0, b1) = self.member_endpoints(second);
                    let degrees = segment_angle(slope(a0, a1), slope(b0, b1));
                    if degrees > 1.0 {
                        out.push(IncludedAngle { node, first, second, degrees });
                    }
                }
            }
        }
        out
    }

    /// The same design turned half a revolution inside its canvas.
    pub fn rotated_180(&self) -> Self {
        let (w, h) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        Self { nodes: self.nodes.iter().map(|&[x, y]| [w - x, h - y]).collect(), ..self.clone() }
    }
}

fn member_length(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 { 0.0 } else { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) };
    (p[0] - (a[0] + t * dx)).hypot(p[1] - (a[1] + t * dy))
}

/// Anti-aliased black members of `line_width` pixels on white.
pub fn render(design: &TrussDesign, line_width: f64) -> RgbImage {
    let mut img = RgbImage::from_pixel(design.width, design.height, Rgb([255, 255, 255]));
    let half = line_width / 2.0;
    for &(a, b) in &design.members {
        let (p, q) = (design.nodes[a], design.nodes[b]);
        let x0 = (p[0].min(q[0]) - half - 1.0).floor().max(0.0) as u32;
        let x1 = ((p[0].max(q[0]) + half + 1.0).ceil() as u32).min(design.width - 1);
        let y0 = (p[1].min(q[1]) - half - 1.0).floor().max(0.0) as u32;
        let y1 = ((p[1].max(q[1]) + half + 1.0).ceil() as u32).min(design.height - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                // Coverage falls off linearly over one pixel across the stroke edge.
                let cover = (half + 0.5 - point_segment_distance([x as f64, y as f64], p, q)).clamp(0.0, 1.0);
                let px = img.get_pixel_mut(x, y);
                let v = (255.0 * (1.0 - cover)).round() as u8;
                if v < px.0[0] {
                    *px = Rgb([v, v, v]);
                }
            }
        }
    }
    img
}

/// Five reference trusses with every joint on the top or bottom chord.
pub fn reference_designs() -> Vec<TrussDesign> {
    let warren_h = 300.0 * (60f64).to_radians().sin();
    vec![
        TrussDesign {
            name: "warren",
            width: 800,
            height: 480,
            nodes: vec![[100.0, 400.0], [400.0, 400.0], [700.0, 400.0], [250.0, 400.0 - warren_h], [550.0, 400.0 - warren_h]],
            members: vec![(0, 1), (1, 2), (3, 4), (0, 3), (3, 1), (1, 4), (4, 2)],
        },
        TrussDesign {
            name: "pratt",
            width: 950,
            height: 480,
            nodes: vec![[100.0, 400.0], [350.0, 400.0], [600.0, 400.0], [850.0, 400.0], [350.0, 150.0], [600.0, 150.0]],
            members: vec![(0, 1), (1, 2), (2, 3), (4, 5), (1, 4), (2, 5), (0, 4), (5, 3), (4, 2)],
        },
        TrussDesign {
            name: "howe",
            width: 960,
            height: 480,
            nodes: vec![
                [80.0, 400.0],
                [280.0, 400.0],
                [480.0, 400.0],
                [680.0, 400.0],
                [880.0, 400.0],
                [280.0, 170.0],
                [480.0, 170.0],
                [680.0, 170.0],
            ],
            members: vec![(0, 1), (1, 2), (2, 3), (3, 4), (5, 6), (6, 7), (1, 5), (2, 6), (3, 7), (0, 5), (7, 4), (1, 6), (3, 6)],
        },
        TrussDesign {
            name: "king_post",
            width: 900,
            height: 480,
            nodes: vec![[100.0, 400.0], [450.0, 400.0], [800.0, 400.0], [450.0, 150.0]],
            members: vec![(0, 1), (1, 2), (0, 3), (3, 2), (1, 3)],
        },
        TrussDesign {
            name: "queen_post",
            width: 910,
            height: 480,
            nodes: vec![[80.0, 400.0], [330.0, 400.0], [580.0, 400.0], [830.0, 400.0], [330.0, 170.0], [580.0, 170.0]],
            members: vec![(0, 1), (1, 2), (2, 3), (4, 5), (0, 4), (5, 3), (1, 4), (2, 5)],
        },
    ]
}
