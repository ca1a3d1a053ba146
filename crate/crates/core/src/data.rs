//! Dataset CSV ingestion/export, augmentation of a small measured set, and a
//! seeded synthetic bridge generator.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    to_feature_vector, BridgeGeometry, BridgeParameters, BridgeSample, Dataset, DomainError, MaterialProperties,
    DIAMETER_RANGE_MM, FEATURE_COUNT,
};
use crate::physics::weight_from_geometry;

/// Column order written by [`write_csv`]. The three material columns may be absent on input.
pub const CSV_COLUMNS: [&str; 10] = [
    "id",
    "beam_count",
    "total_length_mm",
    "mean_length_mm",
    "beam_diameter_mm",
    "mean_angle_deg",
    "density_g_cm3",
    "youngs_modulus_gpa",
    "yield_strength_mpa",
    "weight_g",
];

const OPTIONAL_COLUMNS: [&str; 4] = ["id", "density_g_cm3", "youngs_modulus_gpa", "yield_strength_mpa"];

/// Allowed disagreement between `mean_length_mm` and `total_length_mm / beam_count`.
const MEAN_LENGTH_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("invalid sample at row {row}: {message}")]
    InvalidSample { row: usize, message: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

impl From<csv::Error> for DataError {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map(|p| p.line() as usize).unwrap_or(0);
        DataError::Parse { row, message: e.to_string() }
    }
}

struct ColumnMap {
    index: [Option<usize>; CSV_COLUMNS.len()],
}

impl ColumnMap {
    fn from_header(header: &csv::StringRecord) -> Result<Self, DataError> {
        let mut index = [None; CSV_COLUMNS.len()];
        for (pos, name) in header.iter().enumerate() {
            let name = name.trim();
            match CSV_COLUMNS.iter().position(|c| *c == name) {
                Some(slot) if index[slot].is_none() => index[slot] = Some(pos),
                Some(_) => return Err(DataError::Parse { row: 1, message: format!("duplicate column {name}") }),
                None => return Err(DataError::Parse { row: 1, message: format!("unknown column {name:?}") }),
            }
        }
        for (slot, name) in CSV_COLUMNS.iter().enumerate() {
            if index[slot].is_none() && !OPTIONAL_COLUMNS.contains(name) {
                return Err(DataError::Parse { row: 1, message: format!("missing required column {name}") });
            }
        }
        Ok(Self { index })
    }

    fn field<'r>(&self, record: &'r csv::StringRecord, name: &str) -> Option<&'r str> {
        let slot = CSV_COLUMNS.iter().position(|c| *c == name)?;
        self.index[slot].and_then(|i| record.get(i)).map(str::trim).filter(|s| !s.is_empty())
    }

    fn number(&self, record: &csv::StringRecord, name: &str, row: usize) -> Result<Option<f64>, DataError> {
        self.field(record, name)
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| DataError::Parse { row, message: format!("{name}: cannot parse {s:?} as a number") })
            })
            .transpose()
    }

    fn required(&self, record: &csv::StringRecord, name: &str, row: usize) -> Result<f64, DataError> {
        self.number(record, name, row)?.ok_or_else(|| DataError::Parse { row, message: format!("{name} is empty") })
    }
}

fn parse_row(map: &ColumnMap, record: &csv::StringRecord, row: usize) -> Result<BridgeSample, DataError> {
    let count = map.required(record, "beam_count", row)?;
    if !(count.fract() == 0.0 && count >= 1.0) {
        return Err(DataError::InvalidSample { row, message: format!("beam_count must be a positive integer, got {count}") });
    }
    let count = count as usize;
    let total = map.required(record, "total_length_mm", row)?;
    let mean = map.required(record, "mean_length_mm", row)?;
    let implied = total / count as f64;
    if (mean - implied).abs() > MEAN_LENGTH_TOLERANCE * implied.abs().max(1.0) {
        return Err(DataError::InvalidSample {
            row,
            message: format!("mean_length_mm {mean} disagrees with total/count = {implied}"),
        });
    }
    let defaults = MaterialProperties::default();
    let material = MaterialProperties {
        density_g_cm3: map.number(record, "density_g_cm3", row)?.unwrap_or(defaults.density_g_cm3),
        youngs_modulus_gpa: map.number(record, "youngs_modulus_gpa", row)?.unwrap_or(defaults.youngs_modulus_gpa),
        yield_strength_mpa: map.number(record, "yield_strength_mpa", row)?.unwrap_or(defaults.yield_strength_mpa),
    };
    let geometry = BridgeGeometry::uniform(
        count,
        implied,
        map.required(record, "beam_diameter_mm", row)?,
        map.required(record, "mean_angle_deg", row)?,
    );
    let weight = map.required(record, "weight_g", row)?;
    let id = map.field(record, "id").map(str::to_owned).unwrap_or_else(|| format!("row-{row}"));
    let invalid = |e: DomainError| DataError::InvalidSample { row, message: e.to_string() };
    let params = BridgeParameters::new(geometry, material).map_err(invalid)?;
    BridgeSample::new(id, params, weight).map_err(invalid)
}

/// Parses the dataset CSV. Row numbers count the header as row 1.
pub fn read_csv<R: Read>(reader: R) -> Result<Dataset, DataError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let map = ColumnMap::from_header(rdr.headers()?)?;
    let mut samples = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| DataError::Parse { row, message: e.to_string() })?;
        samples.push(parse_row(&map, &record, row)?);
    }
    Ok(Dataset::new(samples))
}

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    read_csv(std::fs::File::open(path)?)
}

pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<(), DataError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CSV_COLUMNS)?;
    for s in &ds.samples {
        let f = to_feature_vector(&s.params)?;
        let mut record = vec![s.id.clone()];
        record.push(s.params.geometry.beam_count.to_string());
        record.extend(f.0[1..].iter().map(|v| v.to_string()));
        record.push(s.weight_g.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    write_csv(ds, std::fs::File::create(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    /// Uniform multiplicative jitter half-width for geometric parameters.
    pub variation_fraction: f64,
    /// Gaussian noise σ as a fraction of each column's standard deviation over the source set.
    pub noise_sigma_fraction: f64,
    pub target_count: usize,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self { variation_fraction: 0.10, noise_sigma_fraction: 0.01, target_count: 100, seed: 0 }
    }
}

impl AugmentConfig {
    fn validate(&self, source_count: usize) -> Result<(), DataError> {
        if !(0.0..1.0).contains(&self.variation_fraction) {
            return Err(DataError::InvalidConfig(format!(
                "variation fraction must lie in [0, 1), got {}",
                self.variation_fraction
            )));
        }
        if !(self.noise_sigma_fraction >= 0.0 && self.noise_sigma_fraction.is_finite()) {
            return Err(DataError::InvalidConfig(format!(
                "noise fraction must be non-negative, got {}",
                self.noise_sigma_fraction
            )));
        }
        if self.target_count < source_count {
            return Err(DataError::InvalidConfig(format!(
                "target count {} is below the {source_count} source samples",
                self.target_count
            )));
        }
        Ok(())
    }
}

/// Weight of a resized bridge: scales with total strand length, cross-section area and density.
pub fn physics_consistent_weight(old: &BridgeParameters, new: &BridgeParameters, old_weight_g: f64) -> f64 {
    let (og, ng) = (&old.geometry, &new.geometry);
    old_weight_g
        * (ng.total_length_mm() / og.total_length_mm())
        * (ng.beam_diameter_mm / og.beam_diameter_mm).powi(2)
        * (new.material.density_g_cm3 / old.material.density_g_cm3)
}

/// Per-sample RNG stream, independent of how many samples are generated.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn population_std(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    (values.map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

fn jitter(rng: &mut ChaCha8Rng, v: f64) -> f64 {
    if v == 0.0 {
        1.0
    } else {
        rng.random_range(1.0 - v..=1.0 + v)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma > 0.0 {
        Normal::new(0.0, sigma).expect("positive sigma").sample(rng)
    } else {
        0.0
    }
}

/// Grows `ds` to `cfg.target_count` samples. Originals come first and are kept verbatim;
/// generated sample `k` derives from source `k mod |ds|`.
///
/// Each generated sample gets uniform multiplicative jitter on every beam length, the
/// diameter and the angle; its weight is rescaled by [`physics_consistent_weight`];
/// then Gaussian measurement noise is added to the features and the weight. Geometric
/// parameters are finally clamped back into the jitter band of their source.
pub fn augment(ds: &Dataset, cfg: &AugmentConfig) -> Result<Dataset, DataError> {
    if ds.is_empty() {
        return Err(DataError::InvalidConfig("cannot augment an empty dataset".into()));
    }
    cfg.validate(ds.len())?;
    let vectors = ds.samples.iter().map(|s| to_feature_vector(&s.params)).collect::<Result<Vec<_>, _>>()?;
    let mut column_std = [0.0; FEATURE_COUNT];
    for (slot, sd) in column_std.iter_mut().enumerate() {
        *sd = population_std(vectors.iter().map(|v| v.0[slot]));
    }
    let weight_std = population_std(ds.samples.iter().map(|s| s.weight_g));
    let sigma = |slot: usize| cfg.noise_sigma_fraction * column_std[slot];
    let v = cfg.variation_fraction;

    let mut samples = ds.samples.clone();
    for k in 0..cfg.target_count - ds.len() {
        let source = &ds.samples[k % ds.len()];
        let src = &source.params;
        let mut rng = sample_rng(cfg.seed, k as u64);

        let mut lengths: Vec<f64> = src.geometry.beam_lengths_mm.iter().map(|l| l * jitter(&mut rng, v)).collect();
        let diameter = src.geometry.beam_diameter_mm * jitter(&mut rng, v);
        let angle = src.geometry.mean_angle_deg * jitter(&mut rng, v);
        let jittered = BridgeParameters {
            geometry: BridgeGeometry::new(lengths.clone(), diameter, angle),
            material: src.material,
        };
        let mut weight = physics_consistent_weight(src, &jittered, source.weight_g);

        // Measurement noise, applied after the weight rescaling.
        let total: f64 = lengths.iter().sum();
        let length_scale = 1.0 + gaussian(&mut rng, sigma(1)) / total;
        let diameter = diameter + gaussian(&mut rng, sigma(3));
        let angle = angle + gaussian(&mut rng, sigma(4));
        let mut material = src.material;
        material.density_g_cm3 += gaussian(&mut rng, sigma(5));
        material.youngs_modulus_gpa += gaussian(&mut rng, sigma(6));
        material.yield_strength_mpa += gaussian(&mut rng, sigma(7));
        weight += gaussian(&mut rng, cfg.noise_sigma_fraction * weight_std);

        let band = |x: f64, base: f64| x.clamp(base * (1.0 - v), base * (1.0 + v));
        for (l, base) in lengths.iter_mut().zip(&src.geometry.beam_lengths_mm) {
            *l = band(*l * length_scale, *base);
        }
        let diameter = band(diameter, src.geometry.beam_diameter_mm).clamp(DIAMETER_RANGE_MM.0, DIAMETER_RANGE_MM.1);
        let angle = band(angle, src.geometry.mean_angle_deg).clamp(0.0, 90.0);
        let positive = |x: f64, base: f64| if x > 0.0 { x } else { base };
        material.density_g_cm3 = positive(material.density_g_cm3, src.material.density_g_cm3);
        material.youngs_modulus_gpa = positive(material.youngs_modulus_gpa, src.material.youngs_modulus_gpa);
        material.yield_strength_mpa = positive(material.yield_strength_mpa, src.material.yield_strength_mpa);
        let weight = positive(weight, source.weight_g);

        let params = BridgeParameters::new(BridgeGeometry::new(lengths, diameter, angle), material)?;
        samples.push(BridgeSample::new(format!("{}-aug{k}", source.id), params, weight)?);
    }
    Ok(Dataset::new(samples))
}

/// Sampling ranges for [`synthesize`].
pub const SYNTH_BEAM_COUNT: (usize, usize) = (10, 60);
pub const SYNTH_LENGTH_MM: (f64, f64) = (30.0, 150.0);
pub const SYNTH_DIAMETER_MM: (f64, f64) = (1.8, 2.0);
pub const SYNTH_ANGLE_DEG: (f64, f64) = (20.0, 70.0);
/// Mean and σ of the joint/glue overhead multiplier, and its truncation bounds.
pub const SYNTH_OVERHEAD: (f64, f64) = (1.15, 0.05);
pub const SYNTH_OVERHEAD_BOUNDS: (f64, f64) = (1.0, 1.35);

/// `n` plausible bridges whose weight is the volumetric weight times a truncated-normal
/// overhead multiplier (joints and glue).
pub fn synthesize(seed: u64, n: usize) -> Result<Dataset, DataError> {
    if n < 5 {
        return Err(DataError::InvalidConfig(format!("synthesize needs n >= 5, got {n}")));
    }
    let overhead = Normal::new(SYNTH_OVERHEAD.0, SYNTH_OVERHEAD.1).expect("valid normal");
    let samples = (0..n)
        .map(|i| {
            let mut rng = sample_rng(seed, i as u64);
            let count = rng.random_range(SYNTH_BEAM_COUNT.0..=SYNTH_BEAM_COUNT.1);
            // A characteristic member length per bridge, with ±20% spread per member.
            let base = rng.random_range(SYNTH_LENGTH_MM.0..=SYNTH_LENGTH_MM.1);
            let lengths: Vec<f64> = (0..count)
                .map(|_| (base * rng.random_range(0.8..=1.2)).clamp(SYNTH_LENGTH_MM.0, SYNTH_LENGTH_MM.1))
                .collect();
            let diameter = rng.random_range(SYNTH_DIAMETER_MM.0..=SYNTH_DIAMETER_MM.1);
            let angle = rng.random_range(SYNTH_ANGLE_DEG.0..=SYNTH_ANGLE_DEG.1);
            let params =
                BridgeParameters::new(BridgeGeometry::new(lengths, diameter, angle), MaterialProperties::default())?;
            let factor = loop {
                let f = overhead.sample(&mut rng);
                if (SYNTH_OVERHEAD_BOUNDS.0..=SYNTH_OVERHEAD_BOUNDS.1).contains(&f) {
                    break f;
                }
            };
            let weight = weight_from_geometry(&params) * factor;
            Ok(BridgeSample::new(format!("syn-{i:03}"), params, weight)?)
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    Ok(Dataset::new(samples))
}
