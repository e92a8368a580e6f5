//! Dense derivative drivers on top of [`Dual`](super::dual::Dual).

use super::dual::{hessian_of, seed_first, seed_second, Dual1, Dual2};
use crate::error::{Error, Result};

/// Default number of directions propagated per forward pass.
pub const DEFAULT_CHUNK: usize = 8;

/// Gradient of a scalar function by chunked forward-mode seeding.
pub fn gradient<F>(f: F, z: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[Dual1]) -> Dual1,
{
    gradient_chunked(f, z, DEFAULT_CHUNK)
}

pub fn gradient_chunked<F>(f: F, z: &[f64], chunk: usize) -> Result<Vec<f64>>
where
    F: Fn(&[Dual1]) -> Dual1,
{
    let n = z.len();
    let chunk = chunk.max(1);
    let mut grad = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let width = chunk.min(n - start);
        let out = f(&seed_first(z, start, width));
        for k in 0..width {
            grad[start + k] = out.partial(k);
        }
        start += width;
    }
    check_finite(&grad, 1)?;
    Ok(grad)
}

/// Jacobian (`m` rows of length `n`) of a vector function.
pub fn jacobian<F>(g: F, z: &[f64]) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[Dual1]) -> Vec<Dual1>,
{
    let n = z.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut start = 0;
    while start < n {
        let width = DEFAULT_CHUNK.min(n - start);
        let out = g(&seed_first(z, start, width));
        if rows.is_empty() {
            rows = vec![vec![0.0; n]; out.len()];
        }
        for (row, o) in rows.iter_mut().zip(&out) {
            for k in 0..width {
                row[start + k] = o.partial(k);
            }
        }
        start += width;
    }
    if n == 0 {
        rows = vec![Vec::new(); g(&[]).len()];
    }
    for row in &rows {
        check_finite(row, 1)?;
    }
    Ok(rows)
}

/// Dense Hessian (row-major) by forward-over-forward duals.
pub fn hessian<F>(f: F, z: &[f64]) -> Result<Vec<f64>>
where
    F: Fn(&[Dual2]) -> Dual2,
{
    let n = z.len();
    let out = f(&seed_second(z));
    let h = hessian_of(&out, n);
    check_finite(&h, n)?;
    Ok(h)
}

/// `row_len` maps a flat position back to its variable index.
fn check_finite(values: &[f64], row_len: usize) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(k) if row_len > 1 => Err(Error::NonFiniteDerivative(k % row_len)),
        Some(k) => Err(Error::NonFiniteDerivative(k)),
        None => Ok(()),
    }
}
