//! Render each reference truss, run the extraction pipeline on it and compare
//! the recovered members with the drawing. Stage images land in `out_dir`.
//!
//! `cargo run --release --example extract_from_render -- [out_dir]`

use std::path::PathBuf;

use bridge_pinn::vision::render::{reference_designs, render};
use bridge_pinn::vision::{extract_parameters, PipelineConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("truss-stages"));
    let scale = 0.5;
    let cfg = PipelineConfig { keep_stages: true, ..Default::default() };
    std::fs::create_dir_all(&out)?;
    for design in reference_designs() {
        let image = render(&design, 4.0);
        let got = extract_parameters(&image, scale, &cfg)?;
        let drawn: f64 = design.member_lengths_px().iter().sum::<f64>() * scale;
        println!(
            "{:<11} members {:>2}/{:<2}  total {:>7.1} mm (drawn {:>7.1})  mean angle {:>5.1} deg  corners {}",
            design.name, got.beam_count, design.members.len(), got.total_length_mm, drawn, got.mean_angle_deg, got.corner_count
        );
        let dir = out.join(design.name);
        image.save(dir.with_extension("png"))?;
        if let Some(stages) = &got.stages {
            stages.write_to(&dir)?;
        }
    }
    println!("renders and stage images in {}", out.display());
    Ok(())
}
