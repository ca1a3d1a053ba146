//! The two weight predictors, a multilayer perceptron (`pinn`) and a
//! polynomial-expansion branch network (`pikan`), behind one [`Model`] type that
//! also owns the input standardization and the target scaling.
//!
//! Parameters are bound to a [`Tape`] in a fixed order by [`Model::bind`]; the
//! same order is used by [`Model::parameters_mut`] so optimizer steps line up.

mod file;
mod layers;
mod pikan;
mod pinn;
mod poly;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AutodiffError, Tape, Tensor, Var};
use crate::domain::{to_feature_vector, BridgeParameters, DomainError, FeatureVector, StandardizationStats, FEATURE_COUNT};

pub use file::{load, load_as, save, LayerRecord, ModelFile, MODEL_FORMAT, MODEL_FORMAT_VERSION};
pub use layers::{BatchNorm, BatchNormConfig, Dense};
pub use pikan::{Branch, PikanConfig, PikanNet};
pub use pinn::{PinnConfig, PinnNet};
pub use poly::{expanded_dim, polynomial_expand};

use layers::{BatchMoments, ParamCursor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("model file format error: {0}")]
    Format(String),
    #[error("model file i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Pinn,
    Pikan,
}

impl Architecture {
    pub fn as_str(self) -> &'static str {
        match self {
            Architecture::Pinn => "pinn",
            Architecture::Pikan => "pikan",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Architecture {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pinn" => Ok(Architecture::Pinn),
            "pikan" => Ok(Architecture::Pikan),
            other => Err(ModelError::Unsupported(format!("unknown architecture '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Pinn(PinnNet),
    Pikan(PikanNet),
}

/// Network output `r` maps to grams as `mean + std * r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScale {
    pub mean: f64,
    pub std: f64,
}

impl Default for TargetScale {
    fn default() -> Self {
        Self { mean: 0.0, std: 1.0 }
    }
}

impl TargetScale {
    /// Mean and population std of the training weights; a constant target keeps std 1.
    pub fn fit(weights: &[f64]) -> Result<Self, ModelError> {
        if weights.is_empty() {
            return Err(ModelError::Contract("cannot fit target scale to no weights".into()));
        }
        let n = weights.len() as f64;
        let mean = weights.iter().sum::<f64>() / n;
        let sd = (weights.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / n).sqrt();
        Ok(Self { mean, std: if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 } })
    }
}

/// Free-form records carried in the model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    /// Held-out evaluation metrics, echoed verbatim by the service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<serde_json::Value>,
    /// Training configuration and split seed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

/// Result of a forward pass that has not yet touched the model's running statistics.
#[derive(Debug)]
pub struct ForwardPass {
    pub prediction: Var,
    moments: Vec<BatchMoments>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub network: Network,
    pub stats: StandardizationStats,
    pub target: TargetScale,
    pub metadata: ModelMetadata,
}

impl Model {
    pub fn new_pinn(config: PinnConfig, stats: StandardizationStats, target: TargetScale, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PinnNet::new(FEATURE_COUNT, config, &mut rng)?;
        Ok(Self { network: Network::Pinn(net), stats, target, metadata: ModelMetadata::default() })
    }

    pub fn new_pikan(config: PikanConfig, stats: StandardizationStats, target: TargetScale, seed: u64) -> Result<Self, ModelError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = PikanNet::new(FEATURE_COUNT, config, &mut rng)?;
        Ok(Self { network: Network::Pikan(net), stats, target, metadata: ModelMetadata::default() })
    }

    pub fn architecture(&self) -> Architecture {
        match self.network {
            Network::Pinn(_) => Architecture::Pinn,
            Network::Pikan(_) => Architecture::Pikan,
        }
    }

    /// Trainable tensors in binding order.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        match &self.network {
            Network::Pinn(n) => n.parameters(&mut out),
            Network::Pikan(n) => n.parameters(&mut out),
        }
        out
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        match &mut self.network {
            Network::Pinn(n) => n.parameters_mut(&mut out),
            Network::Pikan(n) => n.parameters_mut(&mut out),
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    /// Every stored tensor, trainable or not, keyed by a stable name.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        match &self.network {
            Network::Pinn(n) => n.named(&mut out),
            Network::Pikan(n) => n.named(&mut out),
        }
        out
    }

    pub(crate) fn named_tensors_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out = Vec::new();
        match &mut self.network {
            Network::Pinn(n) => n.named_mut(&mut out),
            Network::Pikan(n) => n.named_mut(&mut out),
        }
        out
    }

    /// Registers every trainable tensor on `tape`.
    pub fn bind(&self, tape: &mut Tape) -> Vec<Var> {
        self.parameters().into_iter().map(|p| tape.param(p.clone())).collect()
    }

    /// Predicted weight in grams (`batch x 1`) for standardized inputs `x` (`batch x 8`).
    /// Running statistics are left untouched; see [`Model::commit`].
    pub fn forward_pass<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        params: &[Var],
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<ForwardPass, ModelError> {
        if x.shape().len() != 2 || x.cols() != FEATURE_COUNT || x.rows() == 0 {
            return Err(ModelError::Contract(format!("expected a non-empty batch x {FEATURE_COUNT} input, got {:?}", x.shape())));
        }
        let mut cursor = ParamCursor::new(params);
        let mut moments = Vec::new();
        let raw = match &self.network {
            Network::Pinn(n) => {
                let input = tape.constant(x.clone());
                n.forward(tape, &mut cursor, input, mode, rng, &mut moments)?
            }
            Network::Pikan(n) => n.forward(tape, &mut cursor, x, mode, rng, &mut moments)?,
        };
        cursor.finish()?;
        let scaled = tape.scale(raw, self.target.std);
        let prediction = tape.add_scalar(scaled, self.target.mean);
        Ok(ForwardPass { prediction, moments })
    }

    /// Folds the batch statistics of a training pass into the running statistics.
    pub fn commit(&mut self, pass: ForwardPass) {
        match &mut self.network {
            Network::Pinn(n) => n.commit(&pass.moments),
            Network::Pikan(n) => n.commit(&pass.moments),
        }
    }

    /// [`Model::forward_pass`] followed by [`Model::commit`].
    pub fn forward<R: Rng + ?Sized>(
        &mut self,
        tape: &mut Tape,
        params: &[Var],
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var, ModelError> {
        let pass = self.forward_pass(tape, params, x, mode, rng)?;
        let prediction = pass.prediction;
        self.commit(pass);
        Ok(prediction)
    }

    /// Standardized `batch x 8` input for raw parameters.
    pub fn standardize(&self, params: &[BridgeParameters]) -> Result<Tensor, ModelError> {
        let rows = params
            .iter()
            .map(|p| to_feature_vector(p).map(|v| self.stats.apply(&v).0))
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(ModelError::Contract("empty batch".into()));
        }
        Ok(Tensor::from_rows(&rows)?)
    }

    /// Inference-mode predictions in grams for standardized inputs.
    pub fn predict_standardized(&self, x: &Tensor) -> Result<Vec<f64>, ModelError> {
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let pass = self.forward_pass(&mut tape, &params, x, Mode::Infer, &mut unused)?;
        Ok(tape.value(pass.prediction).data().to_vec())
    }

    pub fn predict(&self, params: &[BridgeParameters]) -> Result<Vec<f64>, ModelError> {
        self.predict_standardized(&self.standardize(params)?)
    }

    pub fn predict_one(&self, params: &BridgeParameters) -> Result<f64, ModelError> {
        Ok(self.predict(std::slice::from_ref(params))?[0])
    }

    /// Inference-mode output of every branch as slot `feature_index` of the
    /// standardized `baseline` takes each `sweep` value: one row per sweep value,
    /// one column per branch.
    pub fn branch_response(
        &self,
        feature_index: usize,
        sweep: &[f64],
        baseline: &FeatureVector,
    ) -> Result<Vec<Vec<f64>>, ModelError> {
        let Network::Pikan(net) = &self.network else {
            return Err(ModelError::Contract("branch responses exist only for the pikan architecture".into()));
        };
        if feature_index >= FEATURE_COUNT {
            return Err(ModelError::Contract(format!("feature index {feature_index} out of range 0..{FEATURE_COUNT}")));
        }
        if sweep.is_empty() {
            return Ok(Vec::new());
        }
        let rows: Vec<[f64; FEATURE_COUNT]> = sweep
            .iter()
            .map(|&v| {
                let mut row = baseline.0;
                row[feature_index] = v;
                row
            })
            .collect();
        let x = Tensor::from_rows(&rows)?;
        let mut tape = Tape::new();
        let params = self.bind(&mut tape);
        let mut unused = ChaCha8Rng::seed_from_u64(0);
        let out = net.branch_outputs(&mut tape, &mut ParamCursor::new(&params), &x, Mode::Infer, &mut unused, &mut Vec::new())?;
        let table = tape.value(out);
        Ok((0..table.rows()).map(|r| table.row_slice(r).to_vec()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{finite_difference_check_with, GradCheckOptions};
    use crate::domain::{BridgeGeometry, MaterialProperties};
    use crate::physics::{PhysicsBatch, PhysicsConstants, PhysicsLossKind};

    fn identity_stats() -> StandardizationStats {
        StandardizationStats { mean: [0.0; FEATURE_COUNT], std: [1.0; FEATURE_COUNT], degenerate: [false; FEATURE_COUNT] }
    }

    fn random_batch(rng: &mut ChaCha8Rng, rows: usize) -> Tensor {
        let data = (0..rows * FEATURE_COUNT).map(|_| rng.random_range(-2.0..2.0)).collect();
        Tensor::from_vec(rows, FEATURE_COUNT, data).unwrap()
    }

    fn models() -> Vec<Model> {
        vec![
            Model::new_pinn(PinnConfig::default(), identity_stats(), TargetScale::default(), 7).unwrap(),
            Model::new_pikan(PikanConfig::default(), identity_stats(), TargetScale::default(), 7).unwrap(),
        ]
    }

    #[test]
    fn infer_is_deterministic_and_shaped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for model in models() {
            for rows in [1, 5] {
                let x = random_batch(&mut rng, rows);
                let a = model.predict_standardized(&x).unwrap();
                let b = model.predict_standardized(&x).unwrap();
                assert_eq!(a, b);
                assert_eq!(a.len(), rows);
            }
            let mut tape = Tape::new();
            let p = model.bind(&mut tape);
            let pass = model.forward_pass(&mut tape, &p, &random_batch(&mut rng, 6), Mode::Train, &mut rng).unwrap();
            assert_eq!(tape.value(pass.prediction).shape(), &[6, 1]);
        }
    }

    #[test]
    fn train_batch_of_one_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for mut model in models() {
            let mut tape = Tape::new();
            let p = model.bind(&mut tape);
            let x = random_batch(&mut rng, 1);
            assert!(matches!(model.forward(&mut tape, &p, &x, Mode::Train, &mut rng), Err(ModelError::Contract(_))));
        }
    }

    #[test]
    fn zero_weights_predict_zero() {
        let mut model = Model::new_pinn(PinnConfig::default(), identity_stats(), TargetScale::default(), 1).unwrap();
        for t in model.named_tensors_mut() {
            if t.0.ends_with("weight") || t.0.ends_with("bias") {
                t.1.data_mut().fill(0.0);
            }
        }
        let x = random_batch(&mut ChaCha8Rng::seed_from_u64(0), 4);
        assert_eq!(model.predict_standardized(&x).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn zeroed_branches_leave_aggregator_bias_path() {
        let mut model = Model::new_pikan(PikanConfig::default(), identity_stats(), TargetScale::default(), 1).unwrap();
        let Network::Pikan(net) = &mut model.network else { unreachable!() };
        for b in &mut net.branches {
            b.output.weight.data_mut().fill(0.0);
            b.output.bias.data_mut().fill(0.0);
        }
        // Oracle: push a zero vector through the aggregator by hand.
        let mut h = vec![0.0; net.config.branches];
        for d in &net.aggregator {
            h = (0..d.outputs())
                .map(|j| (d.bias.data()[j] + (0..d.inputs()).map(|i| h[i] * d.weight.get(i, j)).sum::<f64>()).max(0.0))
                .collect();
        }
        let expected = net.output.bias.data()[0] + h.iter().enumerate().map(|(i, v)| v * net.output.weight.get(i, 0)).sum::<f64>();
        let x = random_batch(&mut ChaCha8Rng::seed_from_u64(2), 3);
        for p in model.predict_standardized(&x).unwrap() {
            assert_eq!(p, expected);
        }
        let table = model.branch_response(0, &[-1.0, 0.0, 1.0], &FeatureVector([0.0; FEATURE_COUNT])).unwrap();
        assert!(table.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn branch_response_shape_and_constant_sweep() {
        let model = Model::new_pikan(PikanConfig::default(), identity_stats(), TargetScale::default(), 5).unwrap();
        let base = FeatureVector([0.1; FEATURE_COUNT]);
        let sweep: Vec<f64> = (0..50).map(|i| -3.0 + 6.0 * i as f64 / 49.0).collect();
        let table = model.branch_response(2, &sweep, &base).unwrap();
        assert_eq!(table.len(), 50);
        assert!(table.iter().all(|r| r.len() == 8 && r.iter().all(|v| v.is_finite())));
        let flat = model.branch_response(2, &[0.7; 4], &base).unwrap();
        assert!(flat.windows(2).all(|w| w[0] == w[1]));
        assert!(matches!(model.branch_response(8, &sweep, &base), Err(ModelError::Contract(_))));
        let pinn = Model::new_pinn(PinnConfig::default(), identity_stats(), TargetScale::default(), 5).unwrap();
        assert!(pinn.branch_response(0, &sweep, &base).is_err());
    }

    #[test]
    fn training_pass_updates_running_stats_only_on_commit() {
        let mut model = Model::new_pinn(PinnConfig::default(), identity_stats(), TargetScale::default(), 1).unwrap();
        let before = model.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_batch(&mut rng, 8);
        let mut tape = Tape::new();
        let p = model.bind(&mut tape);
        let pass = model.forward_pass(&mut tape, &p, &x, Mode::Train, &mut rng).unwrap();
        assert_eq!(model, before);
        model.commit(pass);
        assert_ne!(model, before);
        let Network::Pinn(net) = &model.network else { unreachable!() };
        assert!(net.hidden.iter().all(|(_, bn)| bn.running_var.data().iter().all(|&v| v >= 0.0)));
    }

    #[test]
    fn target_scale_maps_raw_output() {
        let mut model = Model::new_pinn(PinnConfig::default(), identity_stats(), TargetScale::default(), 1).unwrap();
        let x = random_batch(&mut ChaCha8Rng::seed_from_u64(0), 3);
        let raw = model.predict_standardized(&x).unwrap();
        model.target = TargetScale { mean: 80.0, std: 20.0 };
        let scaled = model.predict_standardized(&x).unwrap();
        for (r, s) in raw.iter().zip(&scaled) {
            assert!((80.0 + 20.0 * r - s).abs() < 1e-12);
        }
        assert_eq!(TargetScale::fit(&[5.0, 5.0]).unwrap(), TargetScale { mean: 5.0, std: 1.0 });
    }

    fn sample_params(rng: &mut ChaCha8Rng, n: usize) -> Vec<BridgeParameters> {
        (0..n)
            .map(|_| {
                let g = BridgeGeometry::uniform(rng.random_range(10..60), rng.random_range(30.0..150.0), rng.random_range(1.8..2.0), rng.random_range(20.0..70.0));
                BridgeParameters::new(g, MaterialProperties::default()).unwrap()
            })
            .collect()
    }

    #[test]
    fn full_loss_gradients_match_central_differences() {
        let c = PhysicsConstants::default();
        let cases = (0..3).flat_map(|s| [(s, PhysicsLossKind::Pinn), (s, PhysicsLossKind::Pikan)]);
        for (arch_seed, kind) in cases {
            let mut rng = ChaCha8Rng::seed_from_u64(arch_seed);
            let params = sample_params(&mut rng, 4);
            let vectors: Vec<FeatureVector> = params.iter().map(|p| to_feature_vector(p).unwrap()).collect();
            let stats = StandardizationStats::fit(&vectors).unwrap();
            let weights: Vec<f64> = params.iter().map(|p| crate::physics::weight_from_geometry(p) * 1.15).collect();
            let target = TargetScale::fit(&weights).unwrap();
            let model = match kind {
                PhysicsLossKind::Pinn => Model::new_pinn(PinnConfig::default(), stats, target, arch_seed),
                PhysicsLossKind::Pikan => Model::new_pikan(PikanConfig::default(), stats, target, arch_seed),
            }
            .unwrap();
            let x = model.standardize(&params).unwrap();
            let batch = PhysicsBatch::new(&params, &c).unwrap();
            let y = Tensor::column(&weights);
            let loss = |tape: &mut Tape, p: &[Var]| -> Result<Var, ModelError> {
                let mut masks = ChaCha8Rng::seed_from_u64(99);
                let pred = model.forward_pass(tape, p, &x, Mode::Train, &mut masks)?.prediction;
                let truth = tape.constant(y.clone());
                let diff = tape.sub(pred, truth)?;
                let sq = tape.square(diff);
                let data = tape.mean(sq);
                let phys = batch.loss(kind, tape, pred).map_err(|e| ModelError::Contract(e.to_string()))?.total;
                let a = tape.scale(data, 0.7);
                let b = tape.scale(phys, 0.3);
                Ok(tape.add(a, b)?)
            };
            let initial: Vec<Tensor> = model.parameters().into_iter().cloned().collect();
            let opts = GradCheckOptions { h: 1e-5, max_coords_per_param: Some(6), seed: arch_seed, ..Default::default() };
            let report = finite_difference_check_with(loss, &initial, &opts).unwrap();
            assert!(report.max_rel_error < 1e-4, "{kind:?} seed {arch_seed}: {report:?}");
        }
    }
}
