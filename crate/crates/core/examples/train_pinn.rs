//! Train the physics-informed MLP on the reference split and print the loss
//! curve every 20 epochs plus held-out metrics.
//!
//! `cargo run --release --example train_pinn -- [model.json]`

use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::models;
use bridge_pinn::training::TrainConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let setup = ReferenceSetup::default();
    let ds = setup.dataset()?;
    let cfg = TrainConfig::pinn(setup.seed);
    let run = train_and_evaluate(&ds, &cfg)?;

    println!("epoch  data        physics     total       val");
    for e in run.history.epochs.iter().filter(|e| e.epoch % 20 == 0) {
        println!("{:>5}  {:<10.4e}  {:<10.4e}  {:<10.4e}  {:.4e}", e.epoch, e.data_loss, e.physics_loss, e.total_loss, e.val_loss);
    }
    let s = &run.report.summary;
    println!("best epoch {:?} of {}", run.history.best_epoch, run.history.epochs.len());
    println!("test: r2 {:.4}  mae {:.2} g  rmse {:.2} g  within 10%: {:.0}%", s.r2.unwrap_or(f64::NAN), s.mae, s.rmse, 100.0 * s.within_10_percent);
    if let Some(path) = std::env::args().nth(1) {
        models::save(&run.model, &path)?;
        println!("saved {path}");
    }
    Ok(())
}
