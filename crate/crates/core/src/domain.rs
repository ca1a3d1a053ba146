//! Domain types for a bridge description, the fixed model-input schema,
//! z-score standardization and seeded train/test splitting.
//!
//! Units at this boundary are always mm, g, g/cm³, GPa, MPa and degrees.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_DENSITY_G_CM3: f64 = 1.4;
pub const DEFAULT_YOUNGS_MODULUS_GPA: f64 = 3.8;
pub const DEFAULT_YIELD_STRENGTH_MPA: f64 = 30.0;

/// Hard limits for a strand diameter; outside the typical band only a warning is logged.
pub const DIAMETER_RANGE_MM: (f64, f64) = (0.5, 5.0);
pub const TYPICAL_DIAMETER_MM: (f64, f64) = (1.8, 2.0);

/// Number of slots in a [`FeatureVector`].
pub const FEATURE_COUNT: usize = 8;

/// Slot names, in order. Also the CSV column names for the feature part of a row.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "beam_count",
    "total_length_mm",
    "mean_length_mm",
    "beam_diameter_mm",
    "mean_angle_deg",
    "density_g_cm3",
    "youngs_modulus_gpa",
    "yield_strength_mpa",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid geometry: {field}: {message}")]
    InvalidGeometry { field: &'static str, message: String },
    #[error("invalid material: {field}: {message}")]
    InvalidMaterial { field: &'static str, message: String },
    #[error("invalid sample {id}: {message}")]
    InvalidSample { id: String, message: String },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

impl DomainError {
    /// Name of the offending input field, when the error is field-specific.
    pub fn field(&self) -> Option<&'static str> {
        match self {
            DomainError::InvalidGeometry { field, .. } | DomainError::InvalidMaterial { field, .. } => {
                Some(field)
            }
            _ => None,
        }
    }
}

fn geometry(field: &'static str, message: impl Into<String>) -> DomainError {
    DomainError::InvalidGeometry { field, message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialProperties {
    pub density_g_cm3: f64,
    pub youngs_modulus_gpa: f64,
    pub yield_strength_mpa: f64,
}

impl Default for MaterialProperties {
    fn default() -> Self {
        Self {
            density_g_cm3: DEFAULT_DENSITY_G_CM3,
            youngs_modulus_gpa: DEFAULT_YOUNGS_MODULUS_GPA,
            yield_strength_mpa: DEFAULT_YIELD_STRENGTH_MPA,
        }
    }
}

impl MaterialProperties {
    pub fn validate(&self) -> Result<(), DomainError> {
        let checks = [
            ("density_g_cm3", self.density_g_cm3),
            ("youngs_modulus_gpa", self.youngs_modulus_gpa),
            ("yield_strength_mpa", self.yield_strength_mpa),
        ];
        for (field, value) in checks {
            if !(value.is_finite() && value > 0.0) {
                return Err(DomainError::InvalidMaterial {
                    field,
                    message: format!("must be a positive number, got {value}"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeGeometry {
    pub beam_lengths_mm: Vec<f64>,
    pub beam_diameter_mm: f64,
    pub mean_angle_deg: f64,
    pub beam_count: usize,
}

impl BridgeGeometry {
    /// Geometry with per-segment lengths; `beam_count` is taken from the list.
    pub fn new(beam_lengths_mm: Vec<f64>, beam_diameter_mm: f64, mean_angle_deg: f64) -> Self {
        let beam_count = beam_lengths_mm.len();
        Self { beam_lengths_mm, beam_diameter_mm, mean_angle_deg, beam_count }
    }

    /// `beam_count` segments of identical length.
    pub fn uniform(beam_count: usize, length_mm: f64, beam_diameter_mm: f64, mean_angle_deg: f64) -> Self {
        Self::new(vec![length_mm; beam_count], beam_diameter_mm, mean_angle_deg)
    }

    pub fn total_length_mm(&self) -> f64 {
        self.beam_lengths_mm.iter().sum()
    }

    pub fn mean_length_mm(&self) -> f64 {
        self.total_length_mm() / self.beam_count as f64
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.beam_count == 0 {
            return Err(geometry("beam_count", "must be a positive integer"));
        }
        if self.beam_lengths_mm.is_empty() {
            return Err(geometry("beam_lengths_mm", "at least one beam length is required"));
        }
        if self.beam_lengths_mm.len() != self.beam_count {
            return Err(geometry(
                "beam_count",
                format!(
                    "{} does not match the {} listed beam lengths",
                    self.beam_count,
                    self.beam_lengths_mm.len()
                ),
            ));
        }
        if let Some(bad) = self.beam_lengths_mm.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(geometry("beam_lengths_mm", format!("lengths must be positive, got {bad}")));
        }
        let d = self.beam_diameter_mm;
        if !(d.is_finite() && d >= DIAMETER_RANGE_MM.0 && d <= DIAMETER_RANGE_MM.1) {
            return Err(geometry(
                "beam_diameter_mm",
                format!("must lie in [{}, {}] mm, got {d}", DIAMETER_RANGE_MM.0, DIAMETER_RANGE_MM.1),
            ));
        }
        if !(d >= TYPICAL_DIAMETER_MM.0 && d <= TYPICAL_DIAMETER_MM.1) {
            log::warn!("beam diameter {d} mm is outside the typical 1.8-2.0 mm spaghetti band");
        }
        let a = self.mean_angle_deg;
        if !(a.is_finite() && (0.0..=90.0).contains(&a)) {
            return Err(geometry("mean_angle_deg", format!("must lie in [0, 90] degrees, got {a}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeParameters {
    pub geometry: BridgeGeometry,
    pub material: MaterialProperties,
}

impl BridgeParameters {
    pub fn new(geometry: BridgeGeometry, material: MaterialProperties) -> Result<Self, DomainError> {
        let params = Self { geometry, material };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        self.geometry.validate()?;
        self.material.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeSample {
    pub id: String,
    pub params: BridgeParameters,
    pub weight_g: f64,
}

impl BridgeSample {
    pub fn new(id: impl Into<String>, params: BridgeParameters, weight_g: f64) -> Result<Self, DomainError> {
        let id = id.into();
        if !(weight_g.is_finite() && weight_g > 0.0) {
            return Err(DomainError::InvalidSample { id, message: format!("weight must be positive, got {weight_g}") });
        }
        params.validate()?;
        Ok(Self { id, params, weight_g })
    }
}

/// Fixed-order model input; see [`FEATURE_NAMES`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn to_feature_vector(params: &BridgeParameters) -> Result<FeatureVector, DomainError> {
    let g = &params.geometry;
    if g.beam_lengths_mm.is_empty() {
        return Err(geometry("beam_lengths_mm", "at least one beam length is required"));
    }
    if g.beam_count == 0 {
        return Err(geometry("beam_count", "must be a positive integer"));
    }
    let total = g.total_length_mm();
    let m = &params.material;
    Ok(FeatureVector([
        g.beam_count as f64,
        total,
        total / g.beam_count as f64,
        g.beam_diameter_mm,
        g.mean_angle_deg,
        m.density_g_cm3,
        m.youngs_modulus_gpa,
        m.yield_strength_mpa,
    ]))
}

/// Per-slot mean and population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: [f64; FEATURE_COUNT],
    pub std: [f64; FEATURE_COUNT],
    /// Slots whose variance was zero; their std was replaced by 1.
    pub degenerate: [bool; FEATURE_COUNT],
}

impl StandardizationStats {
    pub fn fit(vectors: &[FeatureVector]) -> Result<Self, DomainError> {
        if vectors.len() < 2 {
            return Err(DomainError::InsufficientData(format!(
                "standardization needs at least 2 vectors, got {}",
                vectors.len()
            )));
        }
        let n = vectors.len() as f64;
        let mut mean = [0.0; FEATURE_COUNT];
        let mut std = [0.0; FEATURE_COUNT];
        let mut degenerate = [false; FEATURE_COUNT];
        for slot in 0..FEATURE_COUNT {
            let mu = vectors.iter().map(|v| v.0[slot]).sum::<f64>() / n;
            let var = vectors.iter().map(|v| (v.0[slot] - mu).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            mean[slot] = mu;
            // Relative cutoff: a slot that is constant up to rounding is still constant.
            if sd <= 1e-12 * mu.abs().max(1.0) {
                std[slot] = 1.0;
                degenerate[slot] = true;
            } else {
                std[slot] = sd;
            }
        }
        Ok(Self { mean, std, degenerate })
    }

    pub fn apply(&self, v: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (v.0[i] - self.mean[i]) / self.std[i];
        }
        FeatureVector(out)
    }

    pub fn invert(&self, z: &FeatureVector) -> FeatureVector {
        let mut out = [0.0; FEATURE_COUNT];
        for (i, o) in out.iter_mut().enumerate() {
            *o = z.0[i] * self.std[i] + self.mean[i];
        }
        FeatureVector(out)
    }
}

pub fn standardize_fit(train_vectors: &[FeatureVector]) -> Result<StandardizationStats, DomainError> {
    StandardizationStats::fit(train_vectors)
}

pub fn standardize_apply(v: &FeatureVector, stats: &StandardizationStats) -> FeatureVector {
    stats.apply(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<BridgeSample>,
    pub stats: Option<StandardizationStats>,
    pub split: Option<Split>,
}

impl Dataset {
    pub fn new(samples: Vec<BridgeSample>) -> Self {
        Self { samples, stats: None, split: None }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> Vec<BridgeSample> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn train_samples(&self) -> Option<Vec<BridgeSample>> {
        self.split.as_ref().map(|s| self.subset(&s.train))
    }

    pub fn test_samples(&self) -> Option<Vec<BridgeSample>> {
        self.split.as_ref().map(|s| self.subset(&s.test))
    }

    /// Fits standardization on the training split (or on every sample when unsplit).
    pub fn fit_stats(mut self) -> Result<Self, DomainError> {
        let indices: Vec<usize> = match &self.split {
            Some(s) => s.train.clone(),
            None => (0..self.len()).collect(),
        };
        let vectors = indices
            .iter()
            .map(|&i| to_feature_vector(&self.samples[i].params))
            .collect::<Result<Vec<_>, _>>()?;
        self.stats = Some(StandardizationStats::fit(&vectors)?);
        Ok(self)
    }
}

/// Number of test samples for `n` samples at `test_fraction`, rounded half away from zero.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    (n as f64 * test_fraction).round() as usize
}

/// Seeded shuffled partition; `|test| = round(n * test_fraction)`. Index lists come back sorted.
pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<Split, DomainError> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(DomainError::InvalidSplit(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let n_test = test_count(n, test_fraction);
    if n_test == 0 || n_test >= n {
        return Err(DomainError::InsufficientData(format!(
            "{n} samples cannot be split at test fraction {test_fraction}"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut test = order[..n_test].to_vec();
    let mut train = order[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split { train, test })
}

pub fn split_train_test(mut ds: Dataset, test_fraction: f64, seed: u64) -> Result<Dataset, DomainError> {
    if ds.len() < 5 {
        return Err(DomainError::InsufficientData(format!("splitting needs at least 5 samples, got {}", ds.len())));
    }
    ds.split = Some(split_indices(ds.len(), test_fraction, seed)?);
    Ok(ds)
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn split_is_a_partition(n in 5usize..300, frac in 0.05f64..0.6, seed in any::<u64>()) {
            if let Ok(s) = split_indices(n, frac, seed) {
                let mut all: Vec<usize> = s.train.iter().chain(s.test.iter()).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(s.test.len(), test_count(n, frac));
            }
        }

        #[test]
        fn standardized_fit_set_has_zero_mean_unit_std(
            rows in prop::collection::vec(prop::array::uniform8(-1e3f64..1e3), 2..40)
        ) {
            let vs: Vec<FeatureVector> = rows.into_iter().map(FeatureVector).collect();
            let stats = standardize_fit(&vs).unwrap();
            let zs: Vec<FeatureVector> = vs.iter().map(|v| stats.apply(v)).collect();
            let n = zs.len() as f64;
            for slot in 0..FEATURE_COUNT {
                let mu = zs.iter().map(|z| z.0[slot]).sum::<f64>() / n;
                prop_assert!(mu.abs() < 1e-10);
                if !stats.degenerate[slot] {
                    let var = zs.iter().map(|z| (z.0[slot] - mu).powi(2)).sum::<f64>() / n;
                    prop_assert!((var.sqrt() - 1.0).abs() < 1e-10);
                }
            }
        }

        #[test]
        fn feature_derivation_is_pure(lengths in prop::collection::vec(1.0f64..200.0, 1..40)) {
            let p = BridgeParameters::new(BridgeGeometry::new(lengths, 1.9, 40.0), MaterialProperties::default()).unwrap();
            let a = to_feature_vector(&p).unwrap();
            let b = to_feature_vector(&p.clone()).unwrap();
            prop_assert!(a.0.iter().zip(b.0.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }
}
