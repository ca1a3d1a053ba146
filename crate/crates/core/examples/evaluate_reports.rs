//! Train a PINN, write the five evaluation files, and print the range
//! breakdown, error histogram and feature ranking.
//!
//! `cargo run --release --example evaluate_reports -- [report_dir]`

use std::path::PathBuf;

use bridge_pinn::domain::FEATURE_NAMES;
use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("bridge-report"));
    let setup = ReferenceSetup::default();
    let run = train_and_evaluate(&setup.dataset()?, &TrainConfig::pinn(setup.seed))?;
    let r = &run.report;
    r.write_dir(&dir)?;

    println!("overall: {}", serde_json::to_string(&r.summary)?);
    for bin in &r.range.bins {
        let mae = bin.metrics.map(|m| format!("{:.2}", m.mae)).unwrap_or_else(|| "-".into());
        println!("  {:<10} n={:<3} mae {mae}", bin.label, bin.count);
    }
    println!("absolute error histogram ({} g bins):", r.errors.absolute.bin_width);
    for (centre, count) in &r.errors.absolute.bins {
        println!("  {centre:>6.1} {}", "#".repeat(*count));
    }
    let ranking: Vec<&str> = r.sensitivity.ranking.iter().map(|&i| FEATURE_NAMES[i]).collect();
    println!("feature ranking: {}", ranking.join(" > "));
    println!("files in {}", dir.display());
    Ok(())
}
