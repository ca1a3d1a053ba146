//! A small reverse-mode automatic differentiation engine over dense `f64`
//! matrices, plus the Adam optimizer and a central-difference gradient checker.
//!
//! ```
//! use bridge_pinn::autodiff::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Tensor::scalar(2.0));
//! let x = tape.constant(Tensor::scalar(1.0));
//! let wx = tape.mul(w, x).unwrap();
//! let sq = tape.square(wx);
//! let loss = tape.mean(sq);
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(w).item(), 4.0);
//! ```

mod adam;
mod gradcheck;
mod tape;
mod tensor;

use thiserror::Error;

pub use adam::AdamState;
pub use gradcheck::{finite_difference_check, finite_difference_check_with, GradCheckOptions, GradCheckReport};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("numerical error: {0}")]
    Numerical(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
        Tensor::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn relu_definition() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::row(&[-1.0, 0.0, 2.0]));
        let y = t.relu(x);
        assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn identity_matmul() {
        let mut t = Tape::new();
        let i = t.constant(Tensor::identity(2));
        let x = t.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap());
        let y = t.matmul(i, x).unwrap();
        assert_eq!(t.value(y), t.value(x));
    }

    #[test]
    fn mean_of_squares() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::row(&[3.0, -3.0]));
        let s = t.square(x);
        let m = t.mean(s);
        assert_eq!(t.value(m).item(), 9.0);
    }

    #[test]
    fn shape_errors() {
        let mut t = Tape::new();
        let a = t.constant(Tensor::zeros(2, 3));
        let b = t.constant(Tensor::zeros(2, 3));
        let r = t.constant(Tensor::zeros(1, 2));
        assert!(matches!(t.matmul(a, b), Err(AutodiffError::Shape(_))));
        assert!(matches!(t.add_row(a, r), Err(AutodiffError::Shape(_))));
        let c = t.constant(Tensor::zeros(3, 2));
        assert!(matches!(t.add(a, c), Err(AutodiffError::Shape(_))));
        assert!(matches!(t.concat(&[a, c]), Err(AutodiffError::Shape(_))));
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn gradient_of_wx_squared() {
        let mut t = Tape::new();
        let w = t.param(Tensor::scalar(2.0));
        let x = t.constant(Tensor::scalar(1.0));
        let wx = t.mul(w, x).unwrap();
        let sq = t.square(wx);
        let loss = t.mean(sq);
        assert_eq!(t.backward(loss).unwrap().wrt(w).item(), 4.0);
    }

    #[test]
    fn constant_loss_has_zero_gradients() {
        let mut t = Tape::new();
        let w = t.param(Tensor::row(&[1.0, 2.0]));
        let c = t.constant(Tensor::scalar(5.0));
        let loss = t.mean(c);
        let g = t.backward(loss).unwrap().wrt(w);
        assert_eq!(g.data(), &[0.0, 0.0]);
    }

    #[test]
    fn tanh_slope_at_zero() {
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(0.0));
        let y = t.tanh(x);
        assert_eq!(t.backward(y).unwrap().wrt(x).item(), 1.0);
    }

    #[test]
    fn non_scalar_loss_is_contract_error() {
        let mut t = Tape::new();
        let x = t.param(Tensor::row(&[1.0, 2.0]));
        let y = t.square(x);
        assert!(matches!(t.backward(y), Err(AutodiffError::Contract(_))));
    }

    #[test]
    fn gradients_accumulate_over_paths() {
        // y = x*x + x -> dy/dx = 2x + 1
        let mut t = Tape::new();
        let x = t.param(Tensor::scalar(3.0));
        let xx = t.mul(x, x).unwrap();
        let y = t.add(xx, x).unwrap();
        assert_eq!(t.backward(y).unwrap().wrt(x).item(), 7.0);
    }

    #[test]
    fn concat_backward_splits_upstream() {
        let mut t = Tape::new();
        let a = t.param(Tensor::from_rows(&[[1.0], [2.0]]).unwrap());
        let b = t.param(Tensor::from_rows(&[[3.0, 4.0], [5.0, 6.0]]).unwrap());
        let c = t.concat(&[a, b]).unwrap();
        let w = t.constant(Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]).unwrap());
        let p = t.mul(c, w).unwrap();
        let loss = t.sum(p);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.wrt(a).data(), &[1.0, 4.0]);
        assert_eq!(g.wrt(b).data(), &[2.0, 3.0, 5.0, 6.0]);
        // Split pieces together carry the whole upstream gradient.
        let total = g.wrt(a).norm_sq() + g.wrt(b).norm_sq();
        assert_eq!(total, (1..=6).map(|v| (v * v) as f64).sum::<f64>());
    }

    #[test]
    fn inputs_are_not_mutated() {
        let x = Tensor::row(&[1.0, -2.0]);
        let mut t = Tape::new();
        let v = t.param(x.clone());
        let y = t.square(v);
        let loss = t.sum(y);
        let _ = t.value(loss);
        assert_eq!(t.value(v), &x);
    }

    #[test]
    fn quadratic_is_exact() {
        let q = |t: &mut Tape, p: &[Var]| {
            let s = t.square(p[0]);
            let lin = t.scale(p[0], 3.0);
            let y = t.add(s, lin)?;
            Ok(t.sum(y))
        };
        let err = finite_difference_check(q, &[Tensor::row(&[0.5, -1.5, 2.0])], 1e-3).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    fn two_layer_tanh(t: &mut Tape, p: &[Var], x: &Tensor) -> Result<Var, AutodiffError> {
        let x = t.constant(x.clone());
        let h = t.matmul(x, p[0])?;
        let h = t.add_row(h, p[1])?;
        let h = t.tanh(h);
        let o = t.matmul(h, p[2])?;
        let o = t.add_row(o, p[3])?;
        let sq = t.square(o);
        Ok(t.mean(sq))
    }

    #[test]
    fn random_tanh_network_matches_central_differences() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random(&mut rng, 5, 3);
            let params = vec![random(&mut rng, 3, 6), random(&mut rng, 1, 6), random(&mut rng, 6, 2), random(&mut rng, 1, 2)];
            let err = finite_difference_check(|t, p| two_layer_tanh(t, p, &x), &params, 1e-3).unwrap();
            assert!(err < 1e-4, "seed {seed}: {err}");
        }
    }

    #[test]
    fn hinge_away_from_kink() {
        let f = |t: &mut Tape, p: &[Var]| {
            let shifted = t.add_scalar(p[0], -0.5);
            let h = t.hinge(shifted);
            let sq = t.square(h);
            Ok(t.mean(sq))
        };
        let err = finite_difference_check(f, &[Tensor::row(&[1.7, -0.4, 0.9, -2.0])], 1e-4).unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn every_op_gradient_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = random(&mut rng, 4, 3);
        let b = random(&mut rng, 4, 3);
        let r = random(&mut rng, 1, 3);
        let f = |t: &mut Tape, p: &[Var]| {
            let s = t.sub(p[0], p[1])?;
            let m = t.mul(s, p[0])?;
            let mr = t.mul_row(m, p[2])?;
            let pos = t.square(p[1]);
            let pos = t.add_scalar(pos, 1.0);
            let pw = t.powf(pos, -0.5);
            let c = t.concat(&[mr, pw])?;
            let cm = t.col_mean(c)?;
            let th = t.tanh(cm);
            let rl = t.relu(c);
            let rs = t.mean(rl);
            let ts = t.sum(th);
            let out = t.add(ts, rs)?;
            Ok(t.scale(out, 2.5))
        };
        let err = finite_difference_check(f, &[a, b, r], 1e-6).unwrap();
        assert!(err < 1e-6, "{err}");
    }
}
