use super::ModelError;

pub const MAX_DEGREE: usize = 3;

/// Output width of [`polynomial_expand`] for `n` inputs.
pub fn expanded_dim(n: usize, degree: usize) -> usize {
    match degree {
        1 => n,
        2 => 2 * n + n * (n.saturating_sub(1)) / 2,
        _ => 3 * n + n * (n.saturating_sub(1)) / 2,
    }
}

/// Linear terms, then squares, then pairwise products `xᵢxⱼ (i<j)`, then cubes.
pub fn polynomial_expand(x: &[f64], degree: usize) -> Result<Vec<f64>, ModelError> {
    if degree == 0 {
        return Err(ModelError::Contract("polynomial degree must be at least 1".into()));
    }
    if degree > MAX_DEGREE {
        return Err(ModelError::Unsupported(format!("polynomial degree {degree} exceeds {MAX_DEGREE}")));
    }
    let n = x.len();
    let mut out = Vec::with_capacity(expanded_dim(n, degree));
    out.extend_from_slice(x);
    if degree >= 2 {
        out.extend(x.iter().map(|v| v * v));
        for i in 0..n {
            for j in i + 1..n {
                out.push(x[i] * x[j]);
            }
        }
    }
    if degree >= 3 {
        out.extend(x.iter().map(|v| v * v * v));
    }
    Ok(out)
}
