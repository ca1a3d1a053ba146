//! Synthesize 15 source bridges, grow them to 100 with jitter and physically
//! consistent weight rescaling, and write both sets as CSV.
//!
//! `cargo run --example synthesize_augment -- [out_dir]`

use std::path::PathBuf;

use bridge_pinn::data::{augment, save_csv, synthesize, AugmentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&out)?;

    let source = synthesize(42, 15)?;
    let augmented = augment(&source, &AugmentConfig { target_count: 100, seed: 42, ..Default::default() })?;
    save_csv(&source, out.join("source.csv"))?;
    save_csv(&augmented, out.join("augmented.csv"))?;

    let weights: Vec<f64> = augmented.samples.iter().map(|s| s.weight_g).collect();
    let (lo, hi) = weights.iter().fold((f64::MAX, f64::MIN), |(a, b), &w| (a.min(w), b.max(w)));
    println!("{} source rows -> {} rows, weights {lo:.1}..{hi:.1} g", source.len(), augmented.len());
    for s in augmented.samples.iter().skip(15).take(3) {
        let g = &s.params.geometry;
        println!("  {:<14} {:>2} beams, {:>7.1} mm total, d {:.3} mm, {:>5.1} deg -> {:.2} g", s.id, g.beam_count, g.total_length_mm(), g.beam_diameter_mm, g.mean_angle_deg, s.weight_g);
    }
    println!("wrote {}", out.display());
    Ok(())
}
