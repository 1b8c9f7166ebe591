//! Perturbation unknowns `Ψ = (ψ, η, ζ)` and the potential perturbation σ.

use crate::background::BackgroundProfile;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::PlasmaParams;

/// Component arrays are ordered `ψ, η₁, [η₂,] ζ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub fields: Vec<Vec<f64>>,
    pub sigma: Vec<f64>,
}

impl FieldState {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            t: 0.0,
            fields: vec![grid.zeros(); grid.dim() + 2],
            sigma: grid.zeros(),
        }
    }

    pub fn ncomp(&self) -> usize {
        self.fields.len()
    }

    pub fn dim(&self) -> usize {
        self.fields.len() - 2
    }

    pub fn psi(&self) -> &[f64] {
        &self.fields[0]
    }

    pub fn eta(&self, k: usize) -> &[f64] {
        &self.fields[1 + k]
    }

    pub fn zeta(&self) -> &[f64] {
        &self.fields[self.fields.len() - 1]
    }

    pub fn zeta_mut(&mut self) -> &mut Vec<f64> {
        let n = self.fields.len();
        &mut self.fields[n - 1]
    }

    pub fn component_refs(&self) -> Vec<&[f64]> {
        self.fields.iter().map(|f| f.as_slice()).collect()
    }

    /// sup over components and points of |Ψ|.
    pub fn sup_abs(&self) -> f64 {
        self.fields
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0, |a, v| a.max(v.abs()))
    }

    /// θ̃ + ζ > 0 at every node.
    pub fn check_temperature(&self, background: &BackgroundProfile, grid: &Grid) -> Result<()> {
        let zeta = self.zeta();
        for j in 0..grid.n2() {
            for i in 0..grid.ny1() {
                let p = grid.idx(i, j);
                let th = background.at(i).theta + zeta[p];
                if !(th > 0.0) {
                    return Err(Error::TemperatureNonpositive { index: p, value: th });
                }
            }
        }
        Ok(())
    }
}

/// min over wall nodes of `u·n − √(γRθ/m)` with the outward normal
/// `n = (−1, M')/√(1+M'²)`, full velocity `(ũ+η₁, η₂)` and `θ = θ̃+ζ`.
pub fn local_supersonic_margin(
    state: &FieldState,
    background: &BackgroundProfile,
    params: &PlasmaParams,
    grid: &Grid,
) -> Result<f64> {
    let mut margin = f64::INFINITY;
    let wall = background.at(0);
    for j in 0..grid.n2() {
        let p = grid.idx(0, j);
        let theta = wall.theta + state.zeta()[p];
        if !(theta > 0.0) {
            return Err(Error::TemperatureNonpositive { index: p, value: theta });
        }
        let (_, dm, _) = grid.wall(j);
        let u1 = wall.u + state.eta(0)[p];
        let u2 = if grid.dim() == 2 { state.eta(1)[p] } else { 0.0 };
        let un = (-u1 + dm * u2) / (1.0 + dm * dm).sqrt();
        margin = margin.min(un - params.sound_speed(theta));
    }
    Ok(margin)
}

/// The worst wall node, for error reporting.
pub fn assert_supersonic(
    state: &FieldState,
    background: &BackgroundProfile,
    params: &PlasmaParams,
    grid: &Grid,
) -> Result<f64> {
    let margin = local_supersonic_margin(state, background, params, grid)?;
    if margin > 0.0 {
        return Ok(margin);
    }
    let wall = background.at(0);
    let mut worst = (0, f64::INFINITY);
    for j in 0..grid.n2() {
        let p = grid.idx(0, j);
        let theta = wall.theta + state.zeta()[p];
        let (_, dm, _) = grid.wall(j);
        let u2 = if grid.dim() == 2 { state.eta(1)[p] } else { 0.0 };
        let un = (-(wall.u + state.eta(0)[p]) + dm * u2) / (1.0 + dm * dm).sqrt();
        let m = un - params.sound_speed(theta);
        if m < worst.1 {
            worst = (p, m);
        }
    }
    Err(Error::SupersonicLost {
        index: worst.0,
        margin: worst.1,
    })
}
