//! Check reverse-mode gradients of the full training loss against central
//! differences for both architectures.
//!
//! `cargo run --release --example gradcheck`

use bridge_pinn::autodiff::{finite_difference_check_with, GradCheckOptions, Tape, Tensor, Var};
use bridge_pinn::data::synthesize;
use bridge_pinn::models::Architecture;
use bridge_pinn::physics::PhysicsBatch;
use bridge_pinn::training::{batch_loss, init_model, TrainConfig, TrainError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let samples: Vec<_> = synthesize(7, 5)?.samples.into_iter().take(4).collect();
    let params: Vec<_> = samples.iter().map(|s| s.params.clone()).collect();
    let y = Tensor::column(&samples.iter().map(|s| s.weight_g).collect::<Vec<_>>());
    for arch in [Architecture::Pinn, Architecture::Pikan] {
        let cfg = TrainConfig::for_arch(arch, 7);
        let model = init_model(&samples, &cfg)?;
        let x = model.standardize(&params)?;
        let physics = PhysicsBatch::new(&params, &cfg.physics)?;
        let loss = |tape: &mut Tape, vars: &[Var]| -> Result<Var, TrainError> {
            let mut masks = ChaCha8Rng::seed_from_u64(1);
            Ok(batch_loss(&model, tape, vars, &x, &y, &physics, &cfg, &mut masks)?.total)
        };
        let initial: Vec<Tensor> = model.parameters().into_iter().cloned().collect();
        let opts = GradCheckOptions { h: 1e-5, max_coords_per_param: Some(16), ..Default::default() };
        let r = finite_difference_check_with(loss, &initial, &opts)?;
        println!("{arch}: {} coordinates, max relative error {:.2e}, max absolute error {:.2e}", r.coordinates_checked, r.max_rel_error, r.max_abs_error);
    }
    Ok(())
}
