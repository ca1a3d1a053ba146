use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mode, ModelError};
use crate::autodiff::{Tape, Tensor, Var};

/// Pulls parameter handles in the order the layers registered them.
pub(crate) struct ParamCursor<'a> {
    iter: std::slice::Iter<'a, Var>,
}

impl<'a> ParamCursor<'a> {
    pub(crate) fn new(vars: &'a [Var]) -> Self {
        Self { iter: vars.iter() }
    }

    pub(crate) fn next(&mut self) -> Result<Var, ModelError> {
        self.iter.next().copied().ok_or_else(|| ModelError::Contract("fewer parameter handles than parameters".into()))
    }

    pub(crate) fn finish(self) -> Result<(), ModelError> {
        match self.iter.len() {
            0 => Ok(()),
            n => Err(ModelError::Contract(format!("{n} unused parameter handles"))),
        }
    }
}

/// `x · W + b` with `W` stored `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Tensor,
    pub bias: Tensor,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let values = (0..inputs * outputs).map(|_| rng.random_range(-limit..limit)).collect();
        Self {
            weight: Tensor::from_vec(inputs, outputs, values).expect("consistent shape"),
            bias: Tensor::zeros(1, outputs),
        }
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { weight: Tensor::zeros(inputs, outputs), bias: Tensor::zeros(1, outputs) }
    }

    pub fn inputs(&self) -> usize {
        self.weight.rows()
    }

    pub fn outputs(&self) -> usize {
        self.weight.cols()
    }

    pub(crate) fn forward(&self, tape: &mut Tape, params: &mut ParamCursor, x: Var) -> Result<Var, ModelError> {
        let (w, b) = (params.next()?, params.next()?);
        let xw = tape.matmul(x, w)?;
        Ok(tape.add_row(xw, b)?)
    }

    pub(crate) fn parameters<'a>(&'a self, out: &mut Vec<&'a Tensor>) {
        out.push(&self.weight);
        out.push(&self.bias);
    }

    pub(crate) fn parameters_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    pub(crate) fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchNormConfig {
    pub momentum: f64,
    pub epsilon: f64,
}

impl Default for BatchNormConfig {
    fn default() -> Self {
        Self { momentum: 0.9, epsilon: 1e-5 }
    }
}

/// Per-feature batch normalization with learnable scale/shift and running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub config: BatchNormConfig,
}

/// Batch statistics observed in a training forward pass, applied to the running stats afterwards.
#[derive(Debug, Clone)]
pub(crate) struct BatchMoments {
    mean: Tensor,
    var: Tensor,
}

impl BatchNorm {
    pub fn new(features: usize, config: BatchNormConfig) -> Self {
        Self {
            gamma: Tensor::full(1, features, 1.0),
            beta: Tensor::zeros(1, features),
            running_mean: Tensor::zeros(1, features),
            running_var: Tensor::full(1, features, 1.0),
            config,
        }
    }

    pub(crate) fn forward(
        &self,
        tape: &mut Tape,
        params: &mut ParamCursor,
        x: Var,
        mode: Mode,
        moments: &mut Vec<BatchMoments>,
    ) -> Result<Var, ModelError> {
        let (gamma, beta) = (params.next()?, params.next()?);
        let normalized = match mode {
            Mode::Train => {
                if tape.value(x).rows() < 2 {
                    return Err(ModelError::Contract("batch normalization in training mode needs a batch of at least 2".into()));
                }
                let mean = tape.col_mean(x)?;
                let neg_mean = tape.scale(mean, -1.0);
                let centered = tape.add_row(x, neg_mean)?;
                let sq = tape.square(centered);
                let var = tape.col_mean(sq)?;
                moments.push(BatchMoments { mean: tape.value(mean).clone(), var: tape.value(var).clone() });
                let shifted = tape.add_scalar(var, self.config.epsilon);
                let inv_std = tape.powf(shifted, -0.5);
                tape.mul_row(centered, inv_std)?
            }
            Mode::Infer => {
                let neg_mean = tape.constant(self.running_mean.map(|m| -m));
                let inv_std = tape.constant(self.running_var.map(|v| 1.0 / (v + self.config.epsilon).sqrt()));
                let centered = tape.add_row(x, neg_mean)?;
                tape.mul_row(centered, inv_std)?
            }
        };
        let scaled = tape.mul_row(normalized, gamma)?;
        Ok(tape.add_row(scaled, beta)?)
    }

    pub(crate) fn update_running(&mut self, m: &BatchMoments) {
        let mom = self.config.momentum;
        for (r, b) in self.running_mean.data_mut().iter_mut().zip(m.mean.data()) {
            *r = mom * *r + (1.0 - mom) * b;
        }
        for (r, b) in self.running_var.data_mut().iter_mut().zip(m.var.data()) {
            *r = (mom * *r + (1.0 - mom) * b).max(0.0);
        }
    }

    pub(crate) fn parameters<'a>(&'a self, out: &mut Vec<&'a Tensor>) {
        out.push(&self.gamma);
        out.push(&self.beta);
    }

    pub(crate) fn parameters_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }

    pub(crate) fn named<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Tensor)>) {
        out.push((format!("{prefix}.gamma"), &self.gamma));
        out.push((format!("{prefix}.beta"), &self.beta));
        out.push((format!("{prefix}.running_mean"), &self.running_mean));
        out.push((format!("{prefix}.running_var"), &self.running_var));
    }

    pub(crate) fn named_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Tensor)>) {
        out.push((format!("{prefix}.gamma"), &mut self.gamma));
        out.push((format!("{prefix}.beta"), &mut self.beta));
        out.push((format!("{prefix}.running_mean"), &mut self.running_mean));
        out.push((format!("{prefix}.running_var"), &mut self.running_var));
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)` so inference needs no rescaling.
pub(crate) fn dropout<R: Rng + ?Sized>(tape: &mut Tape, x: Var, rate: f64, mode: Mode, rng: &mut R) -> Result<Var, ModelError> {
    if mode == Mode::Infer || rate <= 0.0 {
        return Ok(x);
    }
    let keep = 1.0 - rate;
    let shape = tape.value(x).shape().to_vec();
    let n = tape.value(x).len();
    let mask: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { 1.0 / keep }).collect();
    let mask = tape.constant(Tensor::new(shape, mask)?);
    Ok(tape.mul(x, mask)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dropout_rate_and_rescale() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::full(1000, 100, 1.0));
        let y = dropout(&mut tape, x, 0.3, Mode::Train, &mut rng).unwrap();
        let v = tape.value(y);
        let zeros = v.data().iter().filter(|&&a| a == 0.0).count() as f64 / v.len() as f64;
        assert!((zeros - 0.3).abs() < 0.01, "{zeros}");
        assert!(v.data().iter().all(|&a| a == 0.0 || (a - 1.0 / 0.7).abs() < 1e-15));
        let z = dropout(&mut tape, x, 0.3, Mode::Infer, &mut rng).unwrap();
        assert_eq!(z, x);
    }

    #[test]
    fn batch_norm_normalizes_in_training() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..16).map(|_| (0..5).map(|j| rng.random_range(-3.0..3.0) * (j + 1) as f64 + 7.0).collect()).collect();
        let bn = BatchNorm::new(5, BatchNormConfig::default());
        let mut tape = Tape::new();
        let vars: Vec<Var> = vec![tape.param(bn.gamma.clone()), tape.param(bn.beta.clone())];
        let x = tape.constant(Tensor::from_rows(&rows).unwrap());
        let mut moments = Vec::new();
        let y = bn.forward(&mut tape, &mut ParamCursor::new(&vars), x, Mode::Train, &mut moments).unwrap();
        let out = tape.value(y);
        for c in 0..5 {
            let col: Vec<f64> = (0..16).map(|r| out.get(r, c)).collect();
            let mu = col.iter().sum::<f64>() / 16.0;
            let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / 16.0;
            assert!(mu.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-4, "{var}");
        }
        assert_eq!(moments.len(), 1);
    }

    #[test]
    fn batch_norm_train_rejects_single_row() {
        let bn = BatchNorm::new(2, BatchNormConfig::default());
        let mut tape = Tape::new();
        let vars: Vec<Var> = vec![tape.param(bn.gamma.clone()), tape.param(bn.beta.clone())];
        let x = tape.constant(Tensor::row(&[1.0, 2.0]));
        let r = bn.forward(&mut tape, &mut ParamCursor::new(&vars), x, Mode::Train, &mut Vec::new());
        assert!(matches!(r, Err(ModelError::Contract(_))));
    }
}
