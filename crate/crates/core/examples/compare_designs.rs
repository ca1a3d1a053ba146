//! Load (or quickly train) a model and rank a few candidate designs by
//! predicted weight, as `/api/compare` does.
//!
//! `cargo run --release --example compare_designs -- [model.json]`

use bridge_pinn::experiment::{train_and_evaluate, ReferenceSetup};
use bridge_pinn::service::{DesignInput, LoadedModel, NamedDesign};
use bridge_pinn::training::TrainConfig;

fn design(name: &str, beam_count: i64, mean_length_mm: f64, mean_angle_deg: f64) -> NamedDesign {
    NamedDesign {
        name: name.into(),
        design: DesignInput { beam_count: Some(beam_count), mean_length_mm: Some(mean_length_mm), mean_angle_deg: Some(mean_angle_deg), ..Default::default() },
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let loaded = match std::env::args().nth(1) {
        Some(path) => LoadedModel::from_path(path.as_ref())?,
        None => {
            let setup = ReferenceSetup::default();
            let run = train_and_evaluate(&setup.dataset()?, &TrainConfig::pinn(setup.seed))?;
            LoadedModel { id: "reference-pinn".into(), model: run.model }
        }
    };
    let candidates = [design("warren", 21, 90.0, 60.0), design("pratt", 29, 80.0, 45.0), design("howe", 33, 75.0, 45.0), design("long-span", 45, 110.0, 35.0)];
    let ranked = loaded.compare(&candidates)?;
    println!("model {}", ranked.model_id);
    for (i, r) in ranked.results.iter().enumerate() {
        let band = r.error_band_g.map(|b| format!(" ± {b:.2}")).unwrap_or_default();
        println!("{}. {:<10} {:>7.2} g{band}", i + 1, r.name, r.weight_g);
    }
    Ok(())
}
