use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout, BatchMoments, BatchNorm, BatchNormConfig, Dense, ParamCursor};
use super::{Mode, ModelError};
use crate::autodiff::{Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinnConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: BatchNormConfig,
}

impl Default for PinnConfig {
    fn default() -> Self {
        Self { hidden: vec![64, 128, 64], dropout: 0.3, batch_norm: BatchNormConfig::default() }
    }
}

impl PinnConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(ModelError::Contract("hidden sizes must be non-empty and positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::Contract(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Dense → ReLU → batch-norm → dropout per hidden layer, then a linear scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct PinnNet {
    pub config: PinnConfig,
    pub hidden: Vec<(Dense, BatchNorm)>,
    pub output: Dense,
}

impl PinnNet {
    pub fn new<R: Rng + ?Sized>(inputs: usize, config: PinnConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let mut hidden = Vec::new();
        let mut width = inputs;
        for &h in &config.hidden {
            hidden.push((Dense::glorot(width, h, rng), BatchNorm::new(h, config.batch_norm)));
            width = h;
        }
        let output = Dense::glorot(width, 1, rng);
        Ok(Self { config, hidden, output })
    }

    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        params: &mut ParamCursor,
        x: Var,
        mode: Mode,
        rng: &mut R,
        moments: &mut Vec<BatchMoments>,
    ) -> Result<Var, ModelError> {
        let mut h = x;
        for (dense, bn) in &self.hidden {
            h = dense.forward(tape, params, h)?;
            h = tape.relu(h);
            h = bn.forward(tape, params, h, mode, moments)?;
            h = dropout(tape, h, self.config.dropout, mode, rng)?;
        }
        self.output.forward(tape, params, h)
    }

    pub(crate) fn commit(&mut self, moments: &[BatchMoments]) {
        for ((_, bn), m) in self.hidden.iter_mut().zip(moments) {
            bn.update_running(m);
        }
    }

    pub(crate) fn parameters<'a>(&'a self, out: &mut Vec<&'a Tensor>) {
        for (dense, bn) in &self.hidden {
            dense.parameters(out);
            bn.parameters(out);
        }
        self.output.parameters(out);
    }

    pub(crate) fn parameters_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for (dense, bn) in &mut self.hidden {
            dense.parameters_mut(out);
            bn.parameters_mut(out);
        }
        self.output.parameters_mut(out);
    }

    pub(crate) fn named<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        for (i, (dense, bn)) in self.hidden.iter().enumerate() {
            dense.named(&format!("hidden{i}.dense"), out);
            bn.named(&format!("hidden{i}.bn"), out);
        }
        self.output.named("output", out);
    }

    pub(crate) fn named_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (i, (dense, bn)) in self.hidden.iter_mut().enumerate() {
            dense.named_mut(&format!("hidden{i}.dense"), out);
            bn.named_mut(&format!("hidden{i}.bn"), out);
        }
        self.output.named_mut("output", out);
    }
}
