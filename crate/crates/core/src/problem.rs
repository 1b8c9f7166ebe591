//! A fully specified run: parameters, mesh, background and weight.

use crate::background::{default_beta, reference_alpha, BackgroundProfile};
use crate::diagnostics::DiagnosticContext;
use crate::error::{Error, Result};
use crate::evolve::{EvolveConfig, Evolver};
use crate::grid::Grid;
use crate::params::PlasmaParams;

#[derive(Debug, Clone)]
pub struct Problem {
    pub params: PlasmaParams,
    pub grid: Grid,
    pub background: BackgroundProfile,
    pub beta: f64,
}

impl Problem {
    /// Builds the background on `grid`. `beta` defaults to min(α/2, 1/4)
    /// with α the decay exponent of the half-line profile.
    pub fn new(params: PlasmaParams, grid: Grid, beta: Option<f64>) -> Result<Self> {
        let alpha = reference_alpha(&params)?;
        Self::with_alpha(params, grid, beta, alpha)
    }

    /// As [`Problem::new`] with a known decay exponent.
    pub fn with_alpha(params: PlasmaParams, grid: Grid, beta: Option<f64>, alpha: f64) -> Result<Self> {
        if params.bohm_margin() <= 0.0 {
            return Err(Error::BohmViolated(params.bohm_margin()));
        }
        let margin = params.supersonic_outflow_margin(grid.boundary());
        if margin <= 0.0 {
            return Err(Error::SupersonicLost { index: 0, margin });
        }
        let beta = beta.unwrap_or_else(|| default_beta(alpha));
        if !(beta > 0.0 && beta <= alpha) {
            return Err(Error::InvalidParams {
                name: "beta",
                reason: format!("must lie in (0, {alpha:.6}], got {beta}"),
            });
        }
        let background = if params.phi_b() == 0.0 {
            BackgroundProfile::uniform(&params, grid.ny1(), alpha)
        } else {
            BackgroundProfile::build(&params, &grid, alpha)?
        };
        Ok(Self {
            params,
            grid,
            background,
            beta,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.background.alpha()
    }

    pub fn evolver(&self, config: EvolveConfig) -> Result<Evolver<'_>> {
        Evolver::new(&self.params, &self.grid, &self.background, self.beta, config)
    }

    pub fn diagnostics(&self) -> DiagnosticContext<'_> {
        DiagnosticContext {
            params: &self.params,
            background: &self.background,
            grid: &self.grid,
            beta: self.beta,
        }
    }
}
