//! Evaluate the structural quantities and both physics losses for one bridge
//! as the predicted weight sweeps from the volumetric weight to overload.
//!
//! `cargo run --example physics_residuals`

use bridge_pinn::domain::{BridgeGeometry, BridgeParameters, MaterialProperties};
use bridge_pinn::physics::{derived_quantities, member_section, physics_loss, weight_from_geometry, PhysicsConstants, PhysicsLossKind};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let c = PhysicsConstants::default();
    let bridge = BridgeParameters::new(BridgeGeometry::uniform(20, 50.0, 1.9, 45.0), MaterialProperties::default())?;
    let section = member_section(1.9)?;
    let w_geo = weight_from_geometry(&bridge);
    println!("A = {:.4} mm², I = {:.5} mm⁴, volumetric weight {w_geo:.3} g", section.area_mm2, section.second_moment_mm4);

    let d = derived_quantities(&bridge, w_geo, &c)?;
    println!("at that weight: F = {:.4e} N, σ = {:.4e} MPa, P_cr = {:.3} N, δ_b = {:.3e} mm", d.axial_force_n, d.axial_stress_mpa, d.buckling_load_n, d.midspan_deflection_mm);

    println!("{:>12}  {:>12}  {:>12}  {:>14}  {:>14}", "weight_g", "pinn", "pikan", "euler_buckling", "euler_bernoulli");
    for w in [w_geo, 1.15 * w_geo, 1e3, 1e4, 1e5] {
        let (pinn, _) = physics_loss(PhysicsLossKind::Pinn, std::slice::from_ref(&bridge), &[w], &c)?;
        let (pikan, r) = physics_loss(PhysicsLossKind::Pikan, std::slice::from_ref(&bridge), &[w], &c)?;
        println!("{w:>12.3}  {pinn:>12.4e}  {pikan:>12.4e}  {:>14.4e}  {:>14.4e}", r.euler_buckling, r.euler_bernoulli);
    }
    Ok(())
}
