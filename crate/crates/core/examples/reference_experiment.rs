//! Synthesize 15 bridges, augment to 100, split 80/20, then train both
//! architectures plus the no-physics and linear baselines and compare them on
//! the held-out split.
//!
//! `cargo run --release --example reference_experiment`

use bridge_pinn::data::{augment, synthesize, AugmentConfig};
use bridge_pinn::domain::split_train_test;
use bridge_pinn::eval::{compute_metrics, LinearBaseline};
use bridge_pinn::models::Architecture;
use bridge_pinn::training::{train, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let seed = 42;
    let base = synthesize(seed, 15)?;
    let augmented = augment(&base, &AugmentConfig { target_count: 100, seed, ..Default::default() })?;
    let ds = split_train_test(augmented, 0.2, seed)?;
    let train_set = ds.train_samples().expect("split");
    let test = ds.test_samples().expect("split");
    let truth: Vec<f64> = test.iter().map(|s| s.weight_g).collect();
    let mean_weight = truth.iter().sum::<f64>() / truth.len() as f64;
    let params: Vec<_> = test.iter().map(|s| s.params.clone()).collect();

    let mut runs = vec![
        ("pinn", TrainConfig::for_arch(Architecture::Pinn, seed)),
        ("pikan", TrainConfig::for_arch(Architecture::Pikan, seed)),
    ];
    runs.push(("mlp (no physics)", runs[0].1.without_physics()));
    for (label, cfg) in runs {
        let start = std::time::Instant::now();
        let (model, history) = train(&ds, &cfg)?;
        let m = compute_metrics(&truth, &model.predict(&params)?)?;
        println!(
            "{label:>18}: r2 {:.4}  mae {:.2} g ({:.1}% of mean)  rmse {:.2}  epochs {}  {:.1}s",
            m.r2.unwrap_or(f64::NAN),
            m.mae,
            100.0 * m.mae / mean_weight,
            m.rmse,
            history.epochs.len(),
            start.elapsed().as_secs_f64()
        );
    }
    let linear = LinearBaseline::fit(&train_set)?;
    let m = compute_metrics(&truth, &linear.predict(&test)?)?;
    println!("{:>18}: r2 {:.4}  mae {:.2} g", "linear", m.r2.unwrap_or(f64::NAN), m.mae);
    Ok(())
}
