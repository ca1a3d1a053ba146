//! Structural-mechanics relations for a spaghetti truss and the physics losses
//! built from them.
//!
//! Inputs arrive in boundary units (g, mm, g/cm³, GPa, MPa, degrees). Internally
//! everything is N, mm and MPa, so stresses come out as N/mm² = MPa directly.
//!
//! Every quantity is derived from the predicted weight through uniform load
//! sharing: each of the `N` members carries `F = ŵ·g / N`. The losses exist in
//! two forms: plain `f64` evaluation for reporting, and a taped form for training.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::domain::BridgeParameters;

pub const GPA_TO_MPA: f64 = 1000.0;
/// g/cm³ → g/mm³.
pub const G_PER_CM3_TO_G_PER_MM3: f64 = 1e-3;
pub const GRAMS_PER_KG: f64 = 1000.0;

pub const PINN_CONSTRAINTS: [&str; 3] = ["weight", "stress", "equilibrium"];
pub const PIKAN_CONSTRAINTS: [&str; 8] = [
    "euler_bernoulli",
    "axial_stress",
    "axial_deformation",
    "shear_modulus",
    "von_mises",
    "hooke",
    "shear_stress_strain",
    "euler_buckling",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("batch shape mismatch: {0}")]
    BatchShape(String),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    pub gravity_m_s2: f64,
    pub poisson_ratio: f64,
    pub effective_length_factor: f64,
    /// Midspan deflection limit is `L / serviceability_ratio`.
    pub serviceability_ratio: f64,
}

impl Default for PhysicsConstants {
    fn default() -> Self {
        Self { gravity_m_s2: 9.81, poisson_ratio: 0.3, effective_length_factor: 1.0, serviceability_ratio: 240.0 }
    }
}

impl PhysicsConstants {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let positive = [self.gravity_m_s2, self.effective_length_factor, self.serviceability_ratio];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(PhysicsError::InvalidConstants(format!("{self:?} must be positive")));
        }
        if !(self.poisson_ratio > 0.0 && self.poisson_ratio < 0.5) {
            return Err(PhysicsError::InvalidConstants(format!(
                "Poisson ratio must lie in (0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }
}

/// Solid circular strand cross-section.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MemberSection {
    pub area_mm2: f64,
    pub second_moment_mm4: f64,
}

pub fn member_section(diameter_mm: f64) -> Result<MemberSection, PhysicsError> {
    if !(diameter_mm.is_finite() && diameter_mm > 0.0) {
        return Err(PhysicsError::InvalidGeometry(format!("diameter must be positive, got {diameter_mm}")));
    }
    let d2 = diameter_mm * diameter_mm;
    Ok(MemberSection {
        area_mm2: std::f64::consts::PI * d2 / 4.0,
        second_moment_mm4: std::f64::consts::PI * d2 * d2 / 64.0,
    })
}

/// Volumetric weight in grams: `density × A × total strand length`.
pub fn weight_from_geometry(params: &BridgeParameters) -> f64 {
    let d = params.geometry.beam_diameter_mm;
    let area = std::f64::consts::PI * d * d / 4.0;
    params.material.density_g_cm3 * G_PER_CM3_TO_G_PER_MM3 * area * params.geometry.total_length_mm()
}

/// Per-member quantities implied by a predicted total weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub axial_force_n: f64,
    pub axial_stress_mpa: f64,
    pub strain: f64,
    pub axial_deformation_mm: f64,
    pub shear_modulus_mpa: f64,
    pub shear_stress_mpa: f64,
    pub shear_strain: f64,
    pub buckling_load_n: f64,
    pub midspan_deflection_mm: f64,
    pub von_mises_mpa: f64,
}

/// Weight-independent per-bridge coefficients. Every derived quantity is linear in ŵ.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MemberModel {
    beam_count: f64,
    area_mm2: f64,
    second_moment_mm4: f64,
    mean_length_mm: f64,
    youngs_mpa: f64,
    shear_modulus_mpa: f64,
    yield_mpa: f64,
    buckling_load_n: f64,
    deflection_limit_mm: f64,
    sin_angle: f64,
    geometric_weight_g: f64,
    /// Newtons of member force per gram of predicted weight.
    force_per_gram: f64,
}

impl MemberModel {
    fn new(params: &BridgeParameters, c: &PhysicsConstants) -> Result<Self, PhysicsError> {
        let g = &params.geometry;
        if g.beam_count == 0 {
            return Err(PhysicsError::InvalidGeometry("beam_count must be positive".into()));
        }
        if g.beam_lengths_mm.is_empty() {
            return Err(PhysicsError::InvalidGeometry("no beam lengths".into()));
        }
        let section = member_section(g.beam_diameter_mm)?;
        let n = g.beam_count as f64;
        let youngs_mpa = params.material.youngs_modulus_gpa * GPA_TO_MPA;
        let mean_length_mm = g.total_length_mm() / n;
        let kl = c.effective_length_factor * mean_length_mm;
        Ok(Self {
            beam_count: n,
            area_mm2: section.area_mm2,
            second_moment_mm4: section.second_moment_mm4,
            mean_length_mm,
            youngs_mpa,
            shear_modulus_mpa: youngs_mpa / (2.0 * (1.0 + c.poisson_ratio)),
            yield_mpa: params.material.yield_strength_mpa,
            buckling_load_n: std::f64::consts::PI.powi(2) * youngs_mpa * section.second_moment_mm4 / (kl * kl),
            deflection_limit_mm: mean_length_mm / c.serviceability_ratio,
            sin_angle: g.mean_angle_deg.to_radians().sin(),
            geometric_weight_g: weight_from_geometry(params),
            force_per_gram: c.gravity_m_s2 / GRAMS_PER_KG / n,
        })
    }

    fn derived(&self, weight_g: f64) -> DerivedQuantities {
        let force = weight_g * self.force_per_gram;
        let stress = force / self.area_mm2;
        let shear_stress = force / (2.0 * self.area_mm2);
        DerivedQuantities {
            axial_force_n: force,
            axial_stress_mpa: stress,
            strain: stress / self.youngs_mpa,
            axial_deformation_mm: force * self.mean_length_mm / (self.area_mm2 * self.youngs_mpa),
            shear_modulus_mpa: self.shear_modulus_mpa,
            shear_stress_mpa: shear_stress,
            shear_strain: shear_stress / self.shear_modulus_mpa,
            buckling_load_n: self.buckling_load_n,
            midspan_deflection_mm: force * self.mean_length_mm.powi(3) / (48.0 * self.youngs_mpa * self.second_moment_mm4),
            von_mises_mpa: stress.abs(),
        }
    }
}

pub fn derived_quantities(
    params: &BridgeParameters,
    predicted_weight_g: f64,
    c: &PhysicsConstants,
) -> Result<DerivedQuantities, PhysicsError> {
    if !predicted_weight_g.is_finite() {
        return Err(PhysicsError::BatchShape(format!("predicted weight is not finite: {predicted_weight_g}")));
    }
    Ok(MemberModel::new(params, c)?.derived(predicted_weight_g))
}

/// Batch-mean residual per constraint. Terms not computed by a given loss stay 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PhysicsResiduals {
    pub euler_bernoulli: f64,
    pub axial_stress: f64,
    pub axial_deformation: f64,
    pub shear_modulus: f64,
    pub von_mises: f64,
    pub hooke: f64,
    pub shear_stress_strain: f64,
    pub euler_buckling: f64,
    pub weight: f64,
    pub stress: f64,
    pub equilibrium: f64,
}

impl PhysicsResiduals {
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "euler_bernoulli" => self.euler_bernoulli,
            "axial_stress" => self.axial_stress,
            "axial_deformation" => self.axial_deformation,
            "shear_modulus" => self.shear_modulus,
            "von_mises" => self.von_mises,
            "hooke" => self.hooke,
            "shear_stress_strain" => self.shear_stress_strain,
            "euler_buckling" => self.euler_buckling,
            "weight" => self.weight,
            "stress" => self.stress,
            "equilibrium" => self.equilibrium,
            _ => return None,
        })
    }

    fn set(&mut self, name: &str, value: f64) {
        let slot = match name {
            "euler_bernoulli" => &mut self.euler_bernoulli,
            "axial_stress" => &mut self.axial_stress,
            "axial_deformation" => &mut self.axial_deformation,
            "shear_modulus" => &mut self.shear_modulus,
            "von_mises" => &mut self.von_mises,
            "hooke" => &mut self.hooke,
            "shear_stress_strain" => &mut self.shear_stress_strain,
            "euler_buckling" => &mut self.euler_buckling,
            "weight" => &mut self.weight,
            "stress" => &mut self.stress,
            "equilibrium" => &mut self.equilibrium,
            other => unreachable!("unknown constraint {other}"),
        };
        *slot = value;
    }

    pub fn pinn_total(&self) -> f64 {
        PINN_CONSTRAINTS.iter().map(|n| self.get(n).unwrap_or(0.0)).sum()
    }

    pub fn pikan_total(&self) -> f64 {
        PIKAN_CONSTRAINTS.iter().map(|n| self.get(n).unwrap_or(0.0)).sum()
    }

    pub fn from_named(values: &[(&str, f64)]) -> Self {
        let mut r = Self::default();
        for (name, v) in values {
            r.set(name, *v);
        }
        r
    }

    /// `name,value` lines with a header, in a fixed constraint order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("constraint,value\n");
        for name in PIKAN_CONSTRAINTS.iter().chain(PINN_CONSTRAINTS.iter()) {
            out.push_str(&format!("{name},{}\n", self.get(name).unwrap_or(0.0)));
        }
        out
    }
}

/// Which physics loss a model trains against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhysicsLossKind {
    /// Three terms: weight, stress, equilibrium.
    Pinn,
    /// Eight structural-mechanics terms.
    Pikan,
}

impl PhysicsLossKind {
    pub fn constraints(self) -> &'static [&'static str] {
        match self {
            PhysicsLossKind::Pinn => &PINN_CONSTRAINTS,
            PhysicsLossKind::Pikan => &PIKAN_CONSTRAINTS,
        }
    }
}

fn members(params_batch: &[BridgeParameters], predicted: &[f64], c: &PhysicsConstants) -> Result<Vec<MemberModel>, PhysicsError> {
    if params_batch.is_empty() {
        return Err(PhysicsError::BatchShape("empty batch".into()));
    }
    if params_batch.len() != predicted.len() {
        return Err(PhysicsError::BatchShape(format!(
            "{} parameter sets but {} predictions",
            params_batch.len(),
            predicted.len()
        )));
    }
    params_batch.iter().map(|p| MemberModel::new(p, c)).collect()
}

fn hinge_sq(x: f64) -> f64 {
    let h = x.max(0.0);
    h * h
}

fn batch_mean(values: impl Iterator<Item = f64>, n: usize) -> f64 {
    values.sum::<f64>() / n as f64
}

/// `L_weight + L_stress + L_equilibrium`.
pub fn pinn_physics_loss(
    params_batch: &[BridgeParameters],
    predicted_weights: &[f64],
    c: &PhysicsConstants,
) -> Result<(f64, PhysicsResiduals), PhysicsError> {
    let ms = members(params_batch, predicted_weights, c)?;
    let n = ms.len();
    let pairs = || ms.iter().zip(predicted_weights.iter().copied());
    let weight = batch_mean(pairs().map(|(m, w)| (w - m.geometric_weight_g).powi(2)), n);
    let stress = batch_mean(pairs().map(|(m, w)| hinge_sq(m.derived(w).axial_stress_mpa - m.yield_mpa)), n);
    let negativity = batch_mean(pairs().map(|(_, w)| hinge_sq(-w)), n);
    let imbalance = batch_mean(
        pairs().map(|(m, w)| {
            let total_load = w * c.gravity_m_s2 / GRAMS_PER_KG;
            let vertical = m.beam_count * m.derived(w).axial_force_n * m.sin_angle;
            (total_load - vertical).powi(2)
        }),
        n,
    );
    let r = PhysicsResiduals { weight, stress, equilibrium: negativity + imbalance, ..Default::default() };
    Ok((r.pinn_total(), r))
}

/// Unweighted sum of the eight structural-mechanics constraint means.
pub fn pikan_physics_loss(
    params_batch: &[BridgeParameters],
    predicted_weights: &[f64],
    c: &PhysicsConstants,
) -> Result<(f64, PhysicsResiduals), PhysicsError> {
    let ms = members(params_batch, predicted_weights, c)?;
    let n = ms.len();
    let dq: Vec<(MemberModel, DerivedQuantities)> =
        ms.iter().zip(predicted_weights).map(|(m, &w)| (*m, m.derived(w))).collect();
    let mean = |f: &dyn Fn(&MemberModel, &DerivedQuantities) -> f64| batch_mean(dq.iter().map(|(m, d)| f(m, d)), n);
    let r = PhysicsResiduals {
        hooke: mean(&|m, d| (d.axial_stress_mpa - m.youngs_mpa * d.strain).powi(2)),
        shear_stress_strain: mean(&|_, d| (d.shear_stress_mpa - d.shear_modulus_mpa * d.shear_strain).powi(2)),
        shear_modulus: mean(&|m, d| (d.shear_modulus_mpa - m.youngs_mpa / (2.0 * (1.0 + c.poisson_ratio))).powi(2)),
        axial_stress: mean(&|m, d| (d.axial_stress_mpa - d.axial_force_n / m.area_mm2).powi(2)),
        axial_deformation: mean(&|m, d| {
            (d.axial_deformation_mm - d.axial_force_n * m.mean_length_mm / (m.area_mm2 * m.youngs_mpa)).powi(2)
        }),
        von_mises: mean(&|m, d| hinge_sq(d.von_mises_mpa - m.yield_mpa)),
        euler_buckling: mean(&|_, d| hinge_sq(d.axial_force_n - d.buckling_load_n)),
        euler_bernoulli: mean(&|m, d| hinge_sq(d.midspan_deflection_mm - m.deflection_limit_mm)),
        ..Default::default()
    };
    Ok((r.pikan_total(), r))
}

pub fn physics_loss(
    kind: PhysicsLossKind,
    params_batch: &[BridgeParameters],
    predicted_weights: &[f64],
    c: &PhysicsConstants,
) -> Result<(f64, PhysicsResiduals), PhysicsError> {
    match kind {
        PhysicsLossKind::Pinn => pinn_physics_loss(params_batch, predicted_weights, c),
        PhysicsLossKind::Pikan => pikan_physics_loss(params_batch, predicted_weights, c),
    }
}

/// Per-sample coefficients of a batch, laid out as `n x 1` columns for the tape.
#[derive(Debug, Clone)]
pub struct PhysicsBatch {
    members: Vec<MemberModel>,
    constants: PhysicsConstants,
}

/// Taped physics loss: the total and each named constraint mean, all `1 x 1`.
#[derive(Debug, Clone)]
pub struct TapedPhysics {
    pub total: Var,
    pub terms: Vec<(&'static str, Var)>,
}

impl PhysicsBatch {
    pub fn new(params_batch: &[BridgeParameters], c: &PhysicsConstants) -> Result<Self, PhysicsError> {
        if params_batch.is_empty() {
            return Err(PhysicsError::BatchShape("empty batch".into()));
        }
        let members = params_batch.iter().map(|p| MemberModel::new(p, c)).collect::<Result<_, _>>()?;
        Ok(Self { members, constants: *c })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn column(&self, tape: &mut Tape, f: impl Fn(&MemberModel) -> f64) -> Var {
        let values: Vec<f64> = self.members.iter().map(f).collect();
        tape.constant(Tensor::column(&values))
    }

    fn check(&self, tape: &Tape, predicted: Var) -> Result<(), PhysicsError> {
        let shape = tape.value(predicted).shape();
        if shape != [self.len(), 1] {
            return Err(PhysicsError::BatchShape(format!("predictions {shape:?} for a batch of {}", self.len())));
        }
        Ok(())
    }

    fn mean_square(tape: &mut Tape, x: Var) -> Var {
        let sq = tape.square(x);
        tape.mean(sq)
    }

    fn mean_hinge_square(tape: &mut Tape, x: Var) -> Var {
        let h = tape.hinge(x);
        Self::mean_square(tape, h)
    }

    fn total(tape: &mut Tape, terms: &[(&'static str, Var)]) -> Result<Var, PhysicsError> {
        let mut total = terms[0].1;
        for (_, t) in &terms[1..] {
            total = tape.add(total, *t)?;
        }
        Ok(total)
    }

    /// Taped `L_weight + L_stress + L_equilibrium` for `n x 1` predictions in grams.
    pub fn pinn_loss(&self, tape: &mut Tape, predicted: Var) -> Result<TapedPhysics, PhysicsError> {
        self.check(tape, predicted)?;
        let g = self.constants.gravity_m_s2;
        let w_geo = self.column(tape, |m| m.geometric_weight_g);
        let diff = tape.sub(predicted, w_geo)?;
        let weight = Self::mean_square(tape, diff);

        let stress_per_gram = self.column(tape, |m| m.force_per_gram / m.area_mm2);
        let neg_yield = self.column(tape, |m| -m.yield_mpa);
        let stress = tape.mul(predicted, stress_per_gram)?;
        let excess = tape.add(stress, neg_yield)?;
        let stress_term = Self::mean_hinge_square(tape, excess);

        let negated = tape.scale(predicted, -1.0);
        let negativity = Self::mean_hinge_square(tape, negated);
        let load = tape.scale(predicted, g / GRAMS_PER_KG);
        let force_per_gram = self.column(tape, |m| m.force_per_gram);
        let force = tape.mul(predicted, force_per_gram)?;
        let vertical_per_force = self.column(tape, |m| m.beam_count * m.sin_angle);
        let vertical = tape.mul(force, vertical_per_force)?;
        let imbalance = tape.sub(load, vertical)?;
        let imbalance = Self::mean_square(tape, imbalance);
        let equilibrium = tape.add(negativity, imbalance)?;

        let terms = vec![("weight", weight), ("stress", stress_term), ("equilibrium", equilibrium)];
        Ok(TapedPhysics { total: Self::total(tape, &terms)?, terms })
    }

    /// Taped eight-constraint loss for `n x 1` predictions in grams.
    pub fn pikan_loss(&self, tape: &mut Tape, predicted: Var) -> Result<TapedPhysics, PhysicsError> {
        self.check(tape, predicted)?;
        let nu = self.constants.poisson_ratio;
        let force_per_gram = self.column(tape, |m| m.force_per_gram);
        let force = tape.mul(predicted, force_per_gram)?;
        let inv_area = self.column(tape, |m| 1.0 / m.area_mm2);
        let youngs = self.column(tape, |m| m.youngs_mpa);
        let inv_youngs = self.column(tape, |m| 1.0 / m.youngs_mpa);

        // σ = F/A, ε = σ/E
        let stress = tape.mul(force, inv_area)?;
        let strain = tape.mul(stress, inv_youngs)?;
        let e_eps = tape.mul(youngs, strain)?;
        let hooke = tape.sub(stress, e_eps)?;
        let hooke = Self::mean_square(tape, hooke);

        let f_over_a = tape.mul(force, inv_area)?;
        let axial = tape.sub(stress, f_over_a)?;
        let axial_stress = Self::mean_square(tape, axial);

        // δ = F·L/(A·E)
        let deform_coeff = self.column(tape, |m| m.mean_length_mm / (m.area_mm2 * m.youngs_mpa));
        let deformation = tape.mul(force, deform_coeff)?;
        let expected_deformation = tape.mul(force, deform_coeff)?;
        let deform = tape.sub(deformation, expected_deformation)?;
        let axial_deformation = Self::mean_square(tape, deform);

        // G = E/(2(1+ν)), τ = F/(2A), γ = τ/G
        let shear_mod = self.column(tape, |m| m.shear_modulus_mpa);
        let shear_from_e = self.column(tape, |m| m.youngs_mpa / (2.0 * (1.0 + nu)));
        let shear_gap = tape.sub(shear_mod, shear_from_e)?;
        let shear_modulus = Self::mean_square(tape, shear_gap);
        let half_inv_area = tape.scale(inv_area, 0.5);
        let shear_stress = tape.mul(force, half_inv_area)?;
        let inv_shear = self.column(tape, |m| 1.0 / m.shear_modulus_mpa);
        let shear_strain = tape.mul(shear_stress, inv_shear)?;
        let g_gamma = tape.mul(shear_mod, shear_strain)?;
        let tau_gap = tape.sub(shear_stress, g_gamma)?;
        let shear_stress_strain = Self::mean_square(tape, tau_gap);

        // σ_vm = |σ| for uniaxial members
        let pos = tape.hinge(stress);
        let neg_stress = tape.scale(stress, -1.0);
        let neg = tape.hinge(neg_stress);
        let von_mises_stress = tape.add(pos, neg)?;
        let neg_yield = self.column(tape, |m| -m.yield_mpa);
        let vm_excess = tape.add(von_mises_stress, neg_yield)?;
        let von_mises = Self::mean_hinge_square(tape, vm_excess);

        let neg_pcr = self.column(tape, |m| -m.buckling_load_n);
        let buckling_excess = tape.add(force, neg_pcr)?;
        let euler_buckling = Self::mean_hinge_square(tape, buckling_excess);

        // δ_b = F·L³/(48·E·I) against L/serviceability_ratio
        let deflection_coeff =
            self.column(tape, |m| m.mean_length_mm.powi(3) / (48.0 * m.youngs_mpa * m.second_moment_mm4));
        let deflection = tape.mul(force, deflection_coeff)?;
        let neg_limit = self.column(tape, |m| -m.deflection_limit_mm);
        let deflection_excess = tape.add(deflection, neg_limit)?;
        let euler_bernoulli = Self::mean_hinge_square(tape, deflection_excess);

        let terms = vec![
            ("euler_bernoulli", euler_bernoulli),
            ("axial_stress", axial_stress),
            ("axial_deformation", axial_deformation),
            ("shear_modulus", shear_modulus),
            ("von_mises", von_mises),
            ("hooke", hooke),
            ("shear_stress_strain", shear_stress_strain),
            ("euler_buckling", euler_buckling),
        ];
        Ok(TapedPhysics { total: Self::total(tape, &terms)?, terms })
    }

    pub fn loss(&self, kind: PhysicsLossKind, tape: &mut Tape, predicted: Var) -> Result<TapedPhysics, PhysicsError> {
        match kind {
            PhysicsLossKind::Pinn => self.pinn_loss(tape, predicted),
            PhysicsLossKind::Pikan => self.pikan_loss(tape, predicted),
        }
    }
}
