//! Discrete exponentially weighted Sobolev norms
//! `‖f‖²_{k,β} = Σ_{j≤k} ∫ e^{β y₁} |∇ʲ f|² dx`.

use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAX_ORDER: usize = 3;

/// Squared seminorm contributions `∫ e^{βy₁}|∇ʲf|²` for `j = 0..=k`.
pub fn weighted_seminorms_sq(field: &[f64], k: usize, beta: f64, grid: &Grid) -> Result<Vec<f64>> {
    if k > MAX_ORDER {
        return Err(Error::OrderUnsupported(k));
    }
    let mut out = Vec::with_capacity(k + 1);
    // every ordered tuple of directions of length j; |∇ʲf|² is the sum of
    // their squares
    let mut level: Vec<Vec<f64>> = vec![field.to_vec()];
    for j in 0..=k {
        if j > 0 {
            level = level
                .iter()
                .flat_map(|f| (0..grid.dim()).map(move |d| grid.d_x(d, f)))
                .collect();
        }
        let mut sq = grid.zeros();
        for f in &level {
            for (s, v) in sq.iter_mut().zip(f) {
                *s += v * v;
            }
        }
        out.push(grid.integrate_weighted(&sq, beta));
    }
    Ok(out)
}

pub fn weighted_norm(field: &[f64], k: usize, beta: f64, grid: &Grid) -> Result<f64> {
    Ok(weighted_seminorms_sq(field, k, beta, grid)?.iter().sum::<f64>().sqrt())
}

/// Norm of a vector-valued field given as component arrays.
pub fn weighted_norm_vec(components: &[&[f64]], k: usize, beta: f64, grid: &Grid) -> Result<f64> {
    let mut total = 0.0;
    for c in components {
        total += weighted_seminorms_sq(c, k, beta, grid)?.iter().sum::<f64>();
    }
    Ok(total.sqrt())
}

pub fn sup_abs(field: &[f64]) -> f64 {
    field.iter().fold(0.0, |a, v| a.max(v.abs()))
}
