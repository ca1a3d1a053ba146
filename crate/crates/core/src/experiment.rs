//! The reference run: synthesize, augment, split, train and evaluate.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{augment, synthesize, AugmentConfig, DataError};
use crate::domain::{split_train_test, Dataset, DomainError};
use crate::eval::{evaluate_model, EvalError, EvaluationReport};
use crate::models::Model;
use crate::training::{train, LossHistory, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Contract(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSetup {
    pub seed: u64,
    pub source_count: usize,
    pub augmented_count: usize,
    pub test_fraction: f64,
}

impl Default for ReferenceSetup {
    fn default() -> Self {
        Self { seed: 42, source_count: 15, augmented_count: 100, test_fraction: 0.2 }
    }
}

impl ReferenceSetup {
    /// Synthesized, augmented and split dataset.
    pub fn dataset(&self) -> Result<Dataset, ExperimentError> {
        let base = synthesize(self.seed, self.source_count)?;
        let augmented = augment(&base, &AugmentConfig { target_count: self.augmented_count, seed: self.seed, ..Default::default() })?;
        Ok(split_train_test(augmented, self.test_fraction, self.seed)?)
    }
}

/// A trained model with its history and held-out evaluation.
#[derive(Debug, Clone)]
pub struct TrainedRun {
    pub model: Model,
    pub history: LossHistory,
    pub report: EvaluationReport,
}

/// Trains on the split of `ds`, evaluates on its test samples and embeds the
/// evaluation summary in the model metadata.
pub fn train_and_evaluate(ds: &Dataset, cfg: &TrainConfig) -> Result<TrainedRun, ExperimentError> {
    let test = ds.test_samples().ok_or_else(|| ExperimentError::Contract("dataset has no train/test split".into()))?;
    let (mut model, history) = train(ds, cfg)?;
    let report = evaluate_model(&model, &test, &history)?;
    model.metadata.evaluation = Some(serde_json::to_value(&report.summary).map_err(EvalError::from)?);
    Ok(TrainedRun { model, history, report })
}
