//! Sweep one standardized feature of a trained PIKAN and print what each of
//! its eight branches outputs along the sweep.
//!
//! `cargo run --release --example branch_response -- [feature_index]`

use bridge_pinn::domain::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};
use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let slot: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(1);
    let setup = ReferenceSetup::default();
    let run = train_and_evaluate(&setup.dataset()?, &TrainConfig::pikan(setup.seed))?;
    let sweep: Vec<f64> = (0..=8).map(|i| -2.0 + 0.5 * i as f64).collect();
    let table = run.model.branch_response(slot, &sweep, &FeatureVector([0.0; FEATURE_COUNT]))?;
    println!("sweeping {} (standardized), others at their mean", FEATURE_NAMES[slot]);
    print!("{:>6}", "z");
    for b in 0..table.first().map_or(0, Vec::len) {
        print!("  branch{b:<2}");
    }
    println!();
    for (z, row) in sweep.iter().zip(&table) {
        print!("{z:>6.1}");
        for v in row {
            print!("  {v:>8.4}");
        }
        println!();
    }
    Ok(())
}
