//! Minibatch training with the combined loss
//! `λ_data · MSE + λ_physics · physics`, Adam updates, optional early
//! stopping and a per-epoch loss history.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{AdamState, AutodiffError, Tape, Tensor, Var};
use crate::domain::{
    split_indices, to_feature_vector, BridgeParameters, BridgeSample, Dataset, DomainError, FeatureVector,
    StandardizationStats,
};
use crate::models::{Architecture, ForwardPass, Mode, Model, ModelError, PikanConfig, PinnConfig, TargetScale};
use crate::physics::{physics_loss, PhysicsBatch, PhysicsConstants, PhysicsError, PhysicsLossKind, TapedPhysics};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {message}")]
    Numerical { epoch: usize, batch: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("history i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("history csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub arch: Architecture,
    pub lambda_data: f64,
    pub lambda_physics: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Share of the training split held out for validation.
    pub validation_fraction: f64,
    /// Epochs without validation improvement before stopping; `None` trains every epoch.
    pub early_stopping_patience: Option<usize>,
    /// Rescale the global gradient to at most this L2 norm.
    pub max_grad_norm: Option<f64>,
    pub seed: u64,
    pub physics: PhysicsConstants,
    pub pinn: PinnConfig,
    pub pikan: PikanConfig,
}

impl TrainConfig {
    pub fn pinn(seed: u64) -> Self {
        Self {
            arch: Architecture::Pinn,
            lambda_data: 0.7,
            lambda_physics: 0.3,
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            validation_fraction: 0.2,
            early_stopping_patience: Some(30),
            max_grad_norm: None,
            seed,
            physics: PhysicsConstants::default(),
            pinn: PinnConfig::default(),
            pikan: PikanConfig::default(),
        }
    }

    pub fn pikan(seed: u64) -> Self {
        Self { arch: Architecture::Pikan, epochs: 80, batch_size: 8, early_stopping_patience: None, ..Self::pinn(seed) }
    }

    pub fn for_arch(arch: Architecture, seed: u64) -> Self {
        match arch {
            Architecture::Pinn => Self::pinn(seed),
            Architecture::Pikan => Self::pikan(seed),
        }
    }

    /// Same architecture and schedule with the physics term switched off.
    pub fn without_physics(&self) -> Self {
        Self { lambda_data: 1.0, lambda_physics: 0.0, ..self.clone() }
    }

    pub fn physics_kind(&self) -> PhysicsLossKind {
        match self.arch {
            Architecture::Pinn => PhysicsLossKind::Pinn,
            Architecture::Pikan => PhysicsLossKind::Pikan,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::Config(m));
        if !(self.lambda_data >= 0.0 && self.lambda_physics >= 0.0) || (self.lambda_data + self.lambda_physics - 1.0).abs() > 1e-12 {
            return bad(format!("loss weights must be non-negative and sum to 1, got {} + {}", self.lambda_data, self.lambda_physics));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs == 0 || self.batch_size < 2 {
            return bad("epochs must be positive and batch size at least 2".into());
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!("validation fraction must lie in [0, 1), got {}", self.validation_fraction));
        }
        if let Some(n) = self.max_grad_norm {
            if !(n > 0.0) {
                return bad(format!("gradient norm cap must be positive, got {n}"));
            }
        }
        self.physics.validate()?;
        match self.arch {
            Architecture::Pinn => self.pinn.validate()?,
            Architecture::Pikan => self.pikan.validate()?,
        }
        Ok(())
    }
}

/// One row of [`LossHistory`]; losses are batch-size-weighted epoch means.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub data_loss: f64,
    pub physics_loss: f64,
    pub total_loss: f64,
    /// Combined loss on the validation slice in inference mode; NaN without a slice.
    pub val_loss: f64,
    /// Aligned with [`LossHistory::constraints`].
    pub constraints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossHistory {
    pub constraints: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose weights were returned.
    pub best_epoch: Option<usize>,
}

impl LossHistory {
    pub fn new(kind: PhysicsLossKind) -> Self {
        Self { constraints: kind.constraints().iter().map(|s| s.to_string()).collect(), epochs: Vec::new(), best_epoch: None }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = ["epoch", "data_loss", "physics_loss", "total_loss", "val_loss"].iter().map(|s| s.to_string()).collect();
        h.extend(self.constraints.iter().cloned());
        h
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TrainError> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| TrainError::Csv(e.to_string());
        w.write_record(self.header()).map_err(csv_err)?;
        for r in &self.epochs {
            let mut row = vec![r.epoch.to_string(), r.data_loss.to_string(), r.physics_loss.to_string(), r.total_loss.to_string(), r.val_loss.to_string()];
            row.extend(r.constraints.iter().map(|v| v.to_string()));
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<(), TrainError> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TrainError> {
        let mut r = csv::Reader::from_reader(reader);
        let csv_err = |e: csv::Error| TrainError::Csv(e.to_string());
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
        let fixed = ["epoch", "data_loss", "physics_loss", "total_loss", "val_loss"];
        if header.len() < fixed.len() || header.iter().zip(fixed).any(|(a, b)| a != b) {
            return Err(TrainError::Csv(format!("unexpected history header {header:?}")));
        }
        let mut history = Self { constraints: header[fixed.len()..].to_vec(), epochs: Vec::new(), best_epoch: None };
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let num = |j: usize| -> Result<f64, TrainError> {
                let s = rec.get(j).unwrap_or("");
                s.trim().parse::<f64>().map_err(|_| TrainError::Csv(format!("row {}: bad number '{s}'", i + 2)))
            };
            let epoch = rec.get(0).unwrap_or("").parse::<usize>().map_err(|_| TrainError::Csv(format!("row {}: bad epoch", i + 2)))?;
            history.epochs.push(EpochRecord {
                epoch,
                data_loss: num(1)?,
                physics_loss: num(2)?,
                total_loss: num(3)?,
                val_loss: num(4)?,
                constraints: (fixed.len()..header.len()).map(num).collect::<Result<_, _>>()?,
            });
        }
        Ok(history)
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        Self::read_csv(std::fs::File::open(path)?)
    }
}

/// Separate streams for batch order and dropout masks.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Shuffled batches; a trailing batch of one is merged into the previous one (batch norm needs two rows).
fn batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut out: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if out.len() > 1 && out.last().is_some_and(|b| b.len() == 1) {
        let last = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").extend(last);
    }
    out
}

fn standardized(stats: &StandardizationStats, samples: &[BridgeSample]) -> Result<Tensor, TrainError> {
    let rows = samples
        .iter()
        .map(|s| to_feature_vector(&s.params).map(|v| stats.apply(&v).0))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Tensor::from_rows(&rows)?)
}

/// Training and validation slices carved from the dataset's training split.
pub fn training_slices(ds: &Dataset, cfg: &TrainConfig) -> Result<(Vec<BridgeSample>, Vec<BridgeSample>), TrainError> {
    let train = ds.train_samples().ok_or_else(|| TrainError::Contract("dataset has no train/test split".into()))?;
    if train.is_empty() {
        return Err(TrainError::Contract("empty training split".into()));
    }
    if cfg.validation_fraction == 0.0 {
        return Ok((train, Vec::new()));
    }
    let carve = split_indices(train.len(), cfg.validation_fraction, cfg.seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| train[i].clone()).collect::<Vec<_>>();
    Ok((pick(&carve.train), pick(&carve.test)))
}

/// Fresh model for `cfg`, standardized on `fit` features and scaled to `fit` weights.
pub fn init_model(fit: &[BridgeSample], cfg: &TrainConfig) -> Result<Model, TrainError> {
    let vectors: Vec<FeatureVector> = fit.iter().map(|s| to_feature_vector(&s.params)).collect::<Result<_, _>>()?;
    let stats = StandardizationStats::fit(&vectors)?;
    let weights: Vec<f64> = fit.iter().map(|s| s.weight_g).collect();
    let target = TargetScale::fit(&weights)?;
    Ok(match cfg.arch {
        Architecture::Pinn => Model::new_pinn(cfg.pinn.clone(), stats, target, cfg.seed)?,
        Architecture::Pikan => Model::new_pikan(cfg.pikan.clone(), stats, target, cfg.seed)?,
    })
}

/// Combined loss at the configured weights, in inference mode.
pub fn evaluate_validation(model: &Model, val: &[BridgeSample], cfg: &TrainConfig) -> Result<f64, TrainError> {
    if val.is_empty() {
        return Err(TrainError::Contract("empty validation slice".into()));
    }
    let predicted = model.predict_standardized(&standardized(&model.stats, val)?)?;
    let data = predicted.iter().zip(val).map(|(p, s)| (p - s.weight_g).powi(2)).sum::<f64>() / val.len() as f64;
    let params: Vec<BridgeParameters> = val.iter().map(|s| s.params.clone()).collect();
    let (phys, _) = physics_loss(cfg.physics_kind(), &params, &predicted, &cfg.physics)?;
    Ok(cfg.lambda_data * data + cfg.lambda_physics * phys)
}

#[derive(Default)]
struct EpochAccumulator {
    rows: usize,
    data: f64,
    physics: f64,
    constraints: Vec<f64>,
}

/// Taped loss of one training batch.
pub struct BatchLoss {
    /// Forward pass whose batch-norm moments are committed after the step.
    pub pass: ForwardPass,
    /// `λ_data · data + λ_physics · physics.total`
    pub total: Var,
    /// Mean squared error against the true weights.
    pub data: Var,
    pub physics: TapedPhysics,
}

/// Records the combined data and physics loss for one batch on `tape`.
/// `x` is the standardized `B x 8` input, `y` the `B x 1` true weights.
#[allow(clippy::too_many_arguments)]
pub fn batch_loss<R: Rng + ?Sized>(
    model: &Model,
    tape: &mut Tape,
    vars: &[Var],
    x: &Tensor,
    y: &Tensor,
    physics: &PhysicsBatch,
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<BatchLoss, TrainError> {
    let pass = model.forward_pass(tape, vars, x, Mode::Train, rng)?;
    let pred = pass.prediction;
    let truth = tape.constant(y.clone());
    let diff = tape.sub(pred, truth)?;
    let sq = tape.square(diff);
    let data = tape.mean(sq);
    let phys = physics.loss(cfg.physics_kind(), tape, pred)?;
    let weighted_data = tape.scale(data, cfg.lambda_data);
    let weighted_phys = tape.scale(phys.total, cfg.lambda_physics);
    let total = tape.add(weighted_data, weighted_phys)?;
    Ok(BatchLoss { pass, total, data, physics: phys })
}

/// Trains a fresh model on the training split of `ds`.
pub fn train(ds: &Dataset, cfg: &TrainConfig) -> Result<(Model, LossHistory), TrainError> {
    cfg.validate()?;
    let (fit, val) = training_slices(ds, cfg)?;
    if fit.len() < 2 {
        return Err(TrainError::Contract(format!("need at least 2 training samples, got {}", fit.len())));
    }
    if fit.len() < 2 * cfg.batch_size {
        log::warn!("training set of {} is smaller than two batches of {}", fit.len(), cfg.batch_size);
    }
    let mut model = init_model(&fit, cfg)?;
    model.metadata.provenance = Some(serde_json::json!({
        "train_config": cfg,
        "split": ds.split.as_ref().map(|s| serde_json::json!({"train": s.train.len(), "test": s.test.len()})),
        "fit_samples": fit.len(),
        "validation_samples": val.len(),
    }));
    let history = fit_model(&mut model, &fit, &val, cfg)?;
    Ok((model, history))
}

/// Runs the optimization loop on an initialized model.
pub fn fit_model(model: &mut Model, fit: &[BridgeSample], val: &[BridgeSample], cfg: &TrainConfig) -> Result<LossHistory, TrainError> {
    cfg.validate()?;
    if fit.len() < 2 {
        return Err(TrainError::Contract(format!("need at least 2 training samples, got {}", fit.len())));
    }
    let kind = cfg.physics_kind();
    let x_all = standardized(&model.stats, fit)?;
    let mut order_rng = stream(cfg.seed, 1);
    let mut mask_rng = stream(cfg.seed, 2);
    let mut adam = AdamState::new(cfg.learning_rate, model.parameters());
    let mut history = LossHistory::new(kind);
    let mut best: Option<(f64, usize, Model)> = None;
    let mut stale = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut acc = EpochAccumulator { constraints: vec![0.0; kind.constraints().len()], ..Default::default() };
        for (bi, idx) in batches(fit.len(), cfg.batch_size, &mut order_rng).into_iter().enumerate() {
            let numerical = |message: String| TrainError::Numerical { epoch, batch: bi + 1, message };
            let rows: Vec<&[f64]> = idx.iter().map(|&i| x_all.row_slice(i)).collect();
            let x = Tensor::from_rows(&rows)?;
            let y = Tensor::column(&idx.iter().map(|&i| fit[i].weight_g).collect::<Vec<_>>());
            let params_batch: Vec<BridgeParameters> = idx.iter().map(|&i| fit[i].params.clone()).collect();

            let mut tape = Tape::new();
            let vars = model.bind(&mut tape);
            let physics_batch = PhysicsBatch::new(&params_batch, &cfg.physics)?;
            let BatchLoss { pass, total, data, physics: phys } = batch_loss(model, &mut tape, &vars, &x, &y, &physics_batch, cfg, &mut mask_rng)?;

            let total_value = tape.value(total).item();
            if !total_value.is_finite() {
                return Err(numerical(format!("total loss {total_value}")));
            }
            let n = idx.len() as f64;
            acc.rows += idx.len();
            acc.data += n * tape.value(data).item();
            acc.physics += n * tape.value(phys.total).item();
            for (slot, (_, v)) in acc.constraints.iter_mut().zip(&phys.terms) {
                *slot += n * tape.value(*v).item();
            }

            let grads = tape.backward(total)?;
            let mut g: Vec<Tensor> = vars.iter().map(|v| grads.wrt(*v)).collect();
            if let Some(cap) = cfg.max_grad_norm {
                let norm = g.iter().map(Tensor::norm_sq).sum::<f64>().sqrt();
                if norm > cap {
                    let s = cap / norm;
                    g.iter_mut().for_each(|t| t.data_mut().iter_mut().for_each(|v| *v *= s));
                }
            }
            model.commit(pass);
            adam.step(&mut model.parameters_mut(), &g).map_err(|e| numerical(e.to_string()))?;
        }

        let rows = acc.rows as f64;
        let (data_loss, physics_loss) = (acc.data / rows, acc.physics / rows);
        let val_loss = if val.is_empty() { f64::NAN } else { evaluate_validation(model, val, cfg)? };
        if !val.is_empty() && !val_loss.is_finite() {
            return Err(TrainError::Numerical { epoch, batch: 0, message: format!("validation loss {val_loss}") });
        }
        history.epochs.push(EpochRecord {
            epoch,
            data_loss,
            physics_loss,
            total_loss: cfg.lambda_data * data_loss + cfg.lambda_physics * physics_loss,
            val_loss,
            constraints: acc.constraints.iter().map(|c| c / rows).collect(),
        });

        if let Some(patience) = cfg.early_stopping_patience {
            let monitored = if val.is_empty() { data_loss } else { val_loss };
            if best.as_ref().is_none_or(|(b, _, _)| monitored < *b) {
                best = Some((monitored, epoch, model.clone()));
                stale = 0;
            } else {
                stale += 1;
                if stale >= patience {
                    log::info!("early stopping at epoch {epoch}");
                    break;
                }
            }
        }
    }

    history.best_epoch = Some(history.epochs.len());
    if let Some((_, epoch, best_model)) = best {
        *model = best_model;
        history.best_epoch = Some(epoch);
    }
    Ok(history)
}
