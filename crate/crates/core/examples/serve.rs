//! Start the HTTP API in-process with a freshly trained model.
//!
//! `cargo run --release --example serve -- [bind_addr]`
//!
//! Then, for example:
//! `curl -s localhost:8080/api/predict -H 'content-type: application/json' -d '{"beam_count":30,"mean_length_mm":80,"mean_angle_deg":45}'`

use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::service::{serve, AppState, LoadedModel, ServiceConfig, DEFAULT_BIND};
use bridge_pinn::training::TrainConfig;

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let addr = std::env::args().nth(1).unwrap_or_else(|| DEFAULT_BIND.into()).parse()?;
    let setup = ReferenceSetup::default();
    let run = tokio::task::spawn_blocking(move || -> Result<_, String> {
        let ds = setup.dataset().map_err(|e| e.to_string())?;
        train_and_evaluate(&ds, &TrainConfig::pinn(setup.seed)).map_err(|e| e.to_string())
    })
    .await??;
    println!("trained; held-out mae {:.2} g; serving on http://{addr}", run.report.summary.mae);
    let state = AppState::new(Some(LoadedModel { id: "reference-pinn".into(), model: run.model }), ServiceConfig::default());
    serve(addr, state).await?;
    Ok(())
}
