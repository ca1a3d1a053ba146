use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AutodiffError, Tape, Tensor, Var};

#[derive(Debug, Clone)]
pub struct GradCheckOptions {
    /// Base step; the actual step for coordinate θᵢ is `h * max(1, |θᵢ|)`.
    pub h: f64,
    /// Denominator floor for the relative error.
    pub floor: f64,
    /// Check at most this many coordinates per parameter tensor (sampled with `seed`).
    pub max_coords_per_param: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self { h: 1e-6, floor: 1e-3, max_coords_per_param: None, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    /// `max |analytic - numeric| / max(|analytic|, |numeric|, floor)`.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub coordinates_checked: usize,
    /// (parameter index, flat element index) of the worst coordinate.
    pub worst: Option<(usize, usize)>,
}

fn evaluate<F, E>(f: &F, params: &[Tensor]) -> Result<(Tape, Var, Vec<Var>), E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.param(p.clone())).collect();
    let loss = f(&mut tape, &vars)?;
    Ok((tape, loss, vars))
}

/// Compares reverse-mode gradients of `f` at `params` to central differences.
pub fn finite_difference_check_with<F, E>(
    f: F,
    params: &[Tensor],
    opts: &GradCheckOptions,
) -> Result<GradCheckReport, E>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, E>,
    E: From<AutodiffError>,
{
    let (tape, loss, vars) = evaluate(&f, params)?;
    let grads = tape.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().map(|v| grads.wrt(*v)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut report = GradCheckReport { max_rel_error: 0.0, max_abs_error: 0.0, coordinates_checked: 0, worst: None };
    let mut probe = params.to_vec();
    for (pi, param) in params.iter().enumerate() {
        let coords: Vec<usize> = match opts.max_coords_per_param {
            Some(k) if k < param.len() => {
                let mut c = sample(&mut rng, param.len(), k).into_vec();
                c.sort_unstable();
                c
            }
            _ => (0..param.len()).collect(),
        };
        for ei in coords {
            let theta = param.data()[ei];
            let h = opts.h * theta.abs().max(1.0);
            probe[pi].data_mut()[ei] = theta + h;
            let (t, l, _) = evaluate(&f, &probe)?;
            let up = t.value(l).item();
            probe[pi].data_mut()[ei] = theta - h;
            let (t, l, _) = evaluate(&f, &probe)?;
            let down = t.value(l).item();
            probe[pi].data_mut()[ei] = theta;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi].data()[ei];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(opts.floor);
            report.coordinates_checked += 1;
            report.max_abs_error = report.max_abs_error.max(abs);
            if rel > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = rel;
                report.worst = Some((pi, ei));
            }
        }
    }
    Ok(report)
}

/// Maximum relative error between analytic and central-difference gradients, checking every coordinate.
pub fn finite_difference_check<F>(f: F, params: &[Tensor], h: f64) -> Result<f64, AutodiffError>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var, AutodiffError>,
{
    let opts = GradCheckOptions { h, ..Default::default() };
    finite_difference_check_with(f, params, &opts).map(|r| r.max_rel_error)
}
