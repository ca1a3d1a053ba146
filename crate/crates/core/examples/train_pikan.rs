//! Train the polynomial KAN against the eight-term structural loss and show how
//! much each constraint contributed over training.
//!
//! `cargo run --release --example train_pikan -- [model.json]`

use bridge_pinn::eval::physics_contribution_report;
use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::models;
use bridge_pinn::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = ReferenceSetup::default();
    let ds = setup.dataset()?;
    let run = train_and_evaluate(&ds, &TrainConfig::pikan(setup.seed))?;
    let s = &run.report.summary;
    println!("{} parameters, {} epochs", run.model.parameter_count(), run.history.epochs.len());
    println!("test: r2 {:.4}  mae {:.2} g  rmse {:.2} g", s.r2.unwrap_or(f64::NAN), s.mae, s.rmse);

    let last = run.history.epochs.last().map(|e| e.epoch).unwrap_or(0);
    println!("constraint shares in the final epoch:");
    for row in physics_contribution_report(&run.history)?.iter().filter(|r| r.epoch == last) {
        println!("  {:<20} {:>10.3e}  {:>6.1}%", row.constraint, row.value, 100.0 * row.share.unwrap_or(0.0));
    }
    if let Some(path) = std::env::args().nth(1) {
        models::save(&run.model, &path)?;
        println!("saved {path}");
    }
    Ok(())
}
