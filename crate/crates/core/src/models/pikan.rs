use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{dropout, BatchMoments, BatchNorm, BatchNormConfig, Dense, ParamCursor};
use super::poly::{expanded_dim, polynomial_expand, MAX_DEGREE};
use super::{Mode, ModelError};
use crate::autodiff::{Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PikanConfig {
    pub degree: usize,
    pub branches: usize,
    pub branch_hidden: Vec<usize>,
    pub branch_dropout: f64,
    pub aggregator_hidden: Vec<usize>,
    pub aggregator_dropout: f64,
    pub batch_norm: BatchNormConfig,
}

impl Default for PikanConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            branches: 8,
            branch_hidden: vec![32, 16],
            branch_dropout: 0.1,
            aggregator_hidden: vec![64, 32],
            aggregator_dropout: 0.2,
            batch_norm: BatchNormConfig::default(),
        }
    }
}

impl PikanConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.degree > MAX_DEGREE {
            return Err(ModelError::Unsupported(format!("polynomial degree {} exceeds {MAX_DEGREE}", self.degree)));
        }
        if self.degree == 0 || self.branches == 0 {
            return Err(ModelError::Contract("degree and branch count must be positive".into()));
        }
        if self.branch_hidden.is_empty() || self.branch_hidden.contains(&0) || self.aggregator_hidden.contains(&0) {
            return Err(ModelError::Contract("layer sizes must be positive".into()));
        }
        for rate in [self.branch_dropout, self.aggregator_dropout] {
            if !(0.0..1.0).contains(&rate) {
                return Err(ModelError::Contract(format!("dropout {rate} outside [0, 1)")));
            }
        }
        Ok(())
    }
}

/// One branch: (dense → tanh → batch-norm → dropout) per hidden size, then a scalar head.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub layers: Vec<(Dense, BatchNorm)>,
    pub output: Dense,
}

/// Polynomial expansion shared by parallel branches whose scalar outputs feed a ReLU aggregator.
#[derive(Debug, Clone, PartialEq)]
pub struct PikanNet {
    pub config: PikanConfig,
    pub branches: Vec<Branch>,
    pub aggregator: Vec<Dense>,
    pub output: Dense,
}

impl PikanNet {
    pub fn new<R: Rng + ?Sized>(inputs: usize, config: PikanConfig, rng: &mut R) -> Result<Self, ModelError> {
        config.validate()?;
        let expanded = expanded_dim(inputs, config.degree);
        let branches = (0..config.branches)
            .map(|_| {
                let mut width = expanded;
                let layers = config
                    .branch_hidden
                    .iter()
                    .map(|&h| {
                        let layer = (Dense::glorot(width, h, rng), BatchNorm::new(h, config.batch_norm));
                        width = h;
                        layer
                    })
                    .collect();
                Branch { layers, output: Dense::glorot(width, 1, rng) }
            })
            .collect();
        let mut width = config.branches;
        let aggregator = config
            .aggregator_hidden
            .iter()
            .map(|&h| {
                let d = Dense::glorot(width, h, rng);
                width = h;
                d
            })
            .collect();
        let output = Dense::glorot(width, 1, rng);
        Ok(Self { config, branches, aggregator, output })
    }

    pub fn expand(&self, x: &Tensor) -> Result<Tensor, ModelError> {
        let rows = (0..x.rows())
            .map(|r| polynomial_expand(x.row_slice(r), self.config.degree))
            .collect::<Result<Vec<_>, _>>()?;
        if rows.is_empty() {
            return Err(ModelError::Contract("empty batch".into()));
        }
        Ok(Tensor::from_rows(&rows)?)
    }

    /// Concatenated branch outputs, `batch x branches`.
    pub(crate) fn branch_outputs<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        params: &mut ParamCursor,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
        moments: &mut Vec<BatchMoments>,
    ) -> Result<Var, ModelError> {
        let expanded = tape.constant(self.expand(x)?);
        let mut outs = Vec::with_capacity(self.branches.len());
        for branch in &self.branches {
            let mut h = expanded;
            for (dense, bn) in &branch.layers {
                h = dense.forward(tape, params, h)?;
                h = tape.tanh(h);
                h = bn.forward(tape, params, h, mode, moments)?;
                h = dropout(tape, h, self.config.branch_dropout, mode, rng)?;
            }
            outs.push(branch.output.forward(tape, params, h)?);
        }
        Ok(tape.concat(&outs)?)
    }

    pub(crate) fn forward<R: Rng + ?Sized>(
        &self,
        tape: &mut Tape,
        params: &mut ParamCursor,
        x: &Tensor,
        mode: Mode,
        rng: &mut R,
        moments: &mut Vec<BatchMoments>,
    ) -> Result<Var, ModelError> {
        let mut h = self.branch_outputs(tape, params, x, mode, rng, moments)?;
        for dense in &self.aggregator {
            h = dense.forward(tape, params, h)?;
            h = tape.relu(h);
            h = dropout(tape, h, self.config.aggregator_dropout, mode, rng)?;
        }
        self.output.forward(tape, params, h)
    }

    fn batch_norms_mut(&mut self) -> impl Iterator<Item = &mut BatchNorm> {
        self.branches.iter_mut().flat_map(|b| b.layers.iter_mut().map(|(_, bn)| bn))
    }

    pub(crate) fn commit(&mut self, moments: &[BatchMoments]) {
        for (bn, m) in self.batch_norms_mut().zip(moments) {
            bn.update_running(m);
        }
    }

    pub(crate) fn parameters<'a>(&'a self, out: &mut Vec<&'a Tensor>) {
        for branch in &self.branches {
            for (dense, bn) in &branch.layers {
                dense.parameters(out);
                bn.parameters(out);
            }
            branch.output.parameters(out);
        }
        for dense in &self.aggregator {
            dense.parameters(out);
        }
        self.output.parameters(out);
    }

    pub(crate) fn parameters_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        for branch in &mut self.branches {
            for (dense, bn) in &mut branch.layers {
                dense.parameters_mut(out);
                bn.parameters_mut(out);
            }
            branch.output.parameters_mut(out);
        }
        for dense in &mut self.aggregator {
            dense.parameters_mut(out);
        }
        self.output.parameters_mut(out);
    }

    pub(crate) fn named<'a>(&'a self, out: &mut Vec<(String, &'a Tensor)>) {
        for (b, branch) in self.branches.iter().enumerate() {
            for (i, (dense, bn)) in branch.layers.iter().enumerate() {
                dense.named(&format!("branch{b}.layer{i}.dense"), out);
                bn.named(&format!("branch{b}.layer{i}.bn"), out);
            }
            branch.output.named(&format!("branch{b}.output"), out);
        }
        for (i, dense) in self.aggregator.iter().enumerate() {
            dense.named(&format!("aggregator.layer{i}"), out);
        }
        self.output.named("output", out);
    }

    pub(crate) fn named_mut<'a>(&'a mut self, out: &mut Vec<(String, &'a mut Tensor)>) {
        for (b, branch) in self.branches.iter_mut().enumerate() {
            for (i, (dense, bn)) in branch.layers.iter_mut().enumerate() {
                dense.named_mut(&format!("branch{b}.layer{i}.dense"), out);
                bn.named_mut(&format!("branch{b}.layer{i}.bn"), out);
            }
            branch.output.named_mut(&format!("branch{b}.output"), out);
        }
        for (i, dense) in self.aggregator.iter_mut().enumerate() {
            dense.named_mut(&format!("aggregator.layer{i}"), out);
        }
        self.output.named_mut("output", out);
    }
}
