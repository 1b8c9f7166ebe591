//! Half-line profile composed with `x₁ − M(x₂)` and tabulated on the grid.
//!
//! In computational coordinates the composed background depends on `y₁`
//! alone, so one table of length `n1 + 1` serves every column. Derivatives
//! are with respect to the profile variable; physical gradients follow
//! from `∇f(x₁ − M) = f'·(1, −M')`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::halfline::{solve_stationary_halfline, tabulate_profile, DensityBranch, StationaryProfile1D};
use crate::params::PlasmaParams;

/// Background values and derivatives at one normal station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct BackgroundPoint {
    pub v: f64,
    pub u: f64,
    pub theta: f64,
    pub phi: f64,
    pub dv: f64,
    pub du: f64,
    pub dtheta: f64,
    pub dphi: f64,
    pub d2phi: f64,
}

#[derive(Debug, Clone)]
pub struct BackgroundProfile {
    rows: Vec<BackgroundPoint>,
    alpha: f64,
}

/// Depth and resolution of the reference profile used to fit the decay rate.
pub const REFERENCE_DEPTH: f64 = 20.0;
pub const REFERENCE_CELLS: usize = 2000;

/// Decay exponent of the half-line profile: fitted on a reference profile,
/// or the linearized rate when the wall potential vanishes.
pub fn reference_alpha(params: &PlasmaParams) -> Result<f64> {
    Ok(solve_stationary_halfline(params, REFERENCE_DEPTH, REFERENCE_CELLS)?.alpha_fit)
}

/// Default truncation depth, 40/α.
pub fn default_depth(alpha: f64) -> f64 {
    40.0 / alpha
}

/// Default weight exponent, min(α/2, 1/4).
pub fn default_beta(alpha: f64) -> f64 {
    (0.5 * alpha).min(0.25)
}

impl BackgroundProfile {
    /// Tabulates the stationary profile on the grid's normal nodes.
    pub fn build(params: &PlasmaParams, grid: &Grid, alpha: f64) -> Result<Self> {
        let profile = tabulate_profile(params, grid.l1(), grid.n1())?;
        Self::from_profile(&profile, params, alpha)
    }

    pub fn from_profile(profile: &StationaryProfile1D, params: &PlasmaParams, alpha: f64) -> Result<Self> {
        let branch = DensityBranch::new(params)?;
        let gm1 = params.gamma() - 1.0;
        let mut rows = Vec::with_capacity(profile.x.len());
        for i in 0..profile.x.len() {
            let rho = profile.rho[i];
            let phi = profile.phi[i];
            let dphi = profile.dphi[i];
            // ρ' = φ'/H'(ρ); everything else by the chain rule
            let drho = if dphi == 0.0 { 0.0 } else { dphi / branch.dh(rho - 1.0) };
            rows.push(BackgroundPoint {
                v: rho.ln(),
                u: profile.u[i],
                theta: profile.theta[i],
                phi,
                dv: drho / rho,
                du: -params.u_plus() * drho / (rho * rho),
                dtheta: params.theta_plus() * gm1 * rho.powf(gm1 - 1.0) * drho,
                dphi,
                d2phi: rho - (-phi).exp(),
            });
        }
        if rows.iter().any(|r| !(r.theta > 0.0) || !r.v.is_finite()) {
            return Err(Error::PositivityFailed("background density or temperature".into()));
        }
        Ok(Self { rows, alpha })
    }

    /// Constant far-field state (the φ_b = 0 background).
    pub fn uniform(params: &PlasmaParams, ny1: usize, alpha: f64) -> Self {
        let row = BackgroundPoint {
            u: params.u_plus(),
            theta: params.theta_plus(),
            ..Default::default()
        };
        Self {
            rows: vec![row; ny1],
            alpha,
        }
    }

    #[inline]
    pub fn at(&self, i: usize) -> &BackgroundPoint {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[BackgroundPoint] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sup_abs_phi(&self) -> f64 {
        self.rows.iter().fold(0.0, |a, r| a.max(r.phi.abs()))
    }

    pub fn min_v(&self) -> f64 {
        self.rows.iter().map(|r| r.v).fold(f64::INFINITY, f64::min)
    }

    pub fn max_v(&self) -> f64 {
        self.rows.iter().map(|r| r.v).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest deviation of the last row from (0, u₊, θ₊, 0).
    pub fn far_field_deviation(&self, params: &PlasmaParams) -> f64 {
        let r = self.rows.last().expect("nonempty background");
        r.v.abs()
            .max((r.u - params.u_plus()).abs())
            .max((r.theta - params.theta_plus()).abs())
            .max(r.phi.abs())
    }
}
