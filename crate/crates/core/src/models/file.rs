use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Architecture, Model, ModelError, ModelMetadata, Network, PikanConfig, PikanNet, PinnConfig, PinnNet, TargetScale};
use crate::autodiff::Tensor;
use crate::domain::{StandardizationStats, FEATURE_COUNT, FEATURE_NAMES};

pub const MODEL_FORMAT: &str = "bridge-pinn-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// On-disk JSON envelope for a [`Model`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub arch: Architecture,
    pub config: Value,
    pub stats: StandardizationStats,
    pub target: TargetScale,
    pub feature_schema: Vec<String>,
    #[serde(flatten)]
    pub metadata: ModelMetadata,
    pub layers: Vec<LayerRecord>,
}

fn format_err(msg: impl Into<String>) -> ModelError {
    ModelError::Format(msg.into())
}

impl ModelFile {
    pub fn from_model(model: &Model) -> Self {
        let config = match &model.network {
            Network::Pinn(n) => serde_json::to_value(&n.config),
            Network::Pikan(n) => serde_json::to_value(&n.config),
        }
        .expect("configs serialize");
        let layers = model
            .named_tensors()
            .into_iter()
            .map(|(name, t)| LayerRecord { name, shape: t.shape().to_vec(), values: t.data().to_vec() })
            .collect();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            arch: model.architecture(),
            config,
            stats: model.stats.clone(),
            target: model.target,
            feature_schema: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            metadata: model.metadata.clone(),
            layers,
        }
    }

    /// Parses and checks the envelope before touching the weights.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let raw: Value = serde_json::from_str(text).map_err(|e| format_err(format!("not a model file: {e}")))?;
        match raw.get("format").and_then(Value::as_str) {
            Some(MODEL_FORMAT) => {}
            other => return Err(format_err(format!("bad format tag {other:?}, expected {MODEL_FORMAT:?}"))),
        }
        match raw.get("version").and_then(Value::as_u64) {
            Some(v) if v == MODEL_FORMAT_VERSION as u64 => {}
            other => return Err(format_err(format!("unsupported version {other:?}, expected {MODEL_FORMAT_VERSION}"))),
        }
        serde_json::from_value(raw).map_err(|e| format_err(format!("malformed model file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("model file serializes")
    }

    pub fn into_model(self, expected: Option<Architecture>) -> Result<Model, ModelError> {
        if let Some(arch) = expected {
            if arch != self.arch {
                return Err(format_err(format!("file holds a {} model, expected {arch}", self.arch)));
            }
        }
        if self.feature_schema.len() != FEATURE_COUNT || self.feature_schema.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b) {
            return Err(format_err(format!("feature schema {:?} does not match {:?}", self.feature_schema, FEATURE_NAMES)));
        }
        // Layer shapes come from the config; weights are overwritten below.
        let mut skeleton_rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let network = match self.arch {
            Architecture::Pinn => {
                let cfg: PinnConfig = serde_json::from_value(self.config).map_err(|e| format_err(format!("bad pinn config: {e}")))?;
                Network::Pinn(PinnNet::new(FEATURE_COUNT, cfg, &mut skeleton_rng).map_err(|e| format_err(e.to_string()))?)
            }
            Architecture::Pikan => {
                let cfg: PikanConfig = serde_json::from_value(self.config).map_err(|e| format_err(format!("bad pikan config: {e}")))?;
                Network::Pikan(PikanNet::new(FEATURE_COUNT, cfg, &mut skeleton_rng).map_err(|e| format_err(e.to_string()))?)
            }
        };
        let mut model = Model { network, stats: self.stats, target: self.target, metadata: self.metadata };
        let mut slots = model.named_tensors_mut();
        if slots.len() != self.layers.len() {
            return Err(format_err(format!("expected {} tensors, file has {}", slots.len(), self.layers.len())));
        }
        for ((name, slot), record) in slots.iter_mut().zip(self.layers) {
            if *name != record.name {
                return Err(format_err(format!("expected tensor '{name}', found '{}'", record.name)));
            }
            if slot.shape() != record.shape.as_slice() {
                return Err(format_err(format!("tensor '{name}' has shape {:?}, expected {:?}", record.shape, slot.shape())));
            }
            **slot = Tensor::new(record.shape, record.values).map_err(|e| format_err(format!("tensor '{name}': {e}")))?;
        }
        drop(slots);
        Ok(model)
    }
}

pub fn save(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelError> {
    std::fs::write(path, ModelFile::from_model(model).to_json())?;
    Ok(())
}

/// Loads any architecture.
pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    load_as(path, None)
}

/// Loads and checks the architecture tag when `expected` is given.
pub fn load_as(path: impl AsRef<Path>, expected: Option<Architecture>) -> Result<Model, ModelError> {
    let text = std::fs::read_to_string(path)?;
    ModelFile::from_json(&text)?.into_model(expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn trained_like(arch: Architecture) -> Model {
        let stats = StandardizationStats { mean: [1.5; FEATURE_COUNT], std: [0.7; FEATURE_COUNT], degenerate: [false; FEATURE_COUNT] };
        let target = TargetScale { mean: 91.3, std: 17.25 };
        let mut m = match arch {
            Architecture::Pinn => Model::new_pinn(PinnConfig::default(), stats, target, 3),
            Architecture::Pikan => Model::new_pikan(PikanConfig::default(), stats, target, 3),
        }
        .unwrap();
        // Non-trivial running statistics.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (name, t) in m.named_tensors_mut() {
            if name.ends_with("running_mean") || name.ends_with("running_var") {
                t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.1..2.0) / 3.0);
            }
        }
        m.metadata.evaluation = Some(serde_json::json!({"mae_g": 3.25, "r2": 0.95}));
        m
    }

    #[test]
    fn round_trip_predicts_bitwise_identically() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f64> = (0..100 * FEATURE_COUNT).map(|_| rng.random_range(-3.0..3.0)).collect();
        let x = Tensor::from_vec(100, FEATURE_COUNT, data).unwrap();
        for arch in [Architecture::Pinn, Architecture::Pikan] {
            let model = trained_like(arch);
            let path = dir.path().join(format!("{arch}.json"));
            save(&model, &path).unwrap();
            let back = load_as(&path, Some(arch)).unwrap();
            assert_eq!(back, model);
            let a = model.predict_standardized(&x).unwrap();
            let b = back.predict_standardized(&x).unwrap();
            assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
        }
    }

    #[test]
    fn envelope_errors() {
        let model = trained_like(Architecture::Pinn);
        let text = ModelFile::from_model(&model).to_json();

        let corrupt = text.replacen(MODEL_FORMAT, "bridge-pinn-modem", 1);
        assert!(matches!(ModelFile::from_json(&corrupt), Err(ModelError::Format(_))));

        let mut v: Value = serde_json::from_str(&text).unwrap();
        v["version"] = Value::from(MODEL_FORMAT_VERSION + 1);
        assert!(matches!(ModelFile::from_json(&v.to_string()), Err(ModelError::Format(_))));

        assert!(matches!(ModelFile::from_json(&text[..text.len() / 2]), Err(ModelError::Format(_))));

        let file = ModelFile::from_json(&text).unwrap();
        assert!(matches!(file.clone().into_model(Some(Architecture::Pikan)), Err(ModelError::Format(_))));

        let mut bad_schema = file.clone();
        bad_schema.feature_schema.swap(0, 1);
        assert!(matches!(bad_schema.into_model(None), Err(ModelError::Format(_))));

        let mut bad_shape = file;
        bad_shape.layers[0].shape = vec![1, 1];
        bad_shape.layers[0].values = vec![0.0];
        assert!(matches!(bad_shape.into_model(None), Err(ModelError::Format(_))));
    }
}
