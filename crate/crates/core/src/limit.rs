//! Stationary solutions as long-time limits of the evolution, plus the
//! decay fits used to measure the approach.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::Serialize;

use crate::diagnostics::RecordSink;
use crate::error::{Error, Result};
use crate::evolve::{EvolveConfig, StateSink, StopReason, Trajectory};
use crate::fit::{fit_exponential_rate, least_squares_slope, r_squared};
use crate::grid::Grid;
use crate::norms::weighted_norm_vec;
use crate::problem::Problem;
use crate::state::FieldState;

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    /// sup over nodes of the time-derivative-free residual.
    pub rate_sup: f64,
    /// The same residual in ‖·‖_{0,β}.
    pub rate_norm: f64,
    /// sup residual of the σ equation.
    pub sigma: f64,
}

impl ResidualReport {
    pub fn max(&self) -> f64 {
        self.rate_sup.max(self.sigma)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarySolution {
    #[serde(skip)]
    pub state: FieldState,
    pub residual: ResidualReport,
    pub steps: usize,
    pub t: f64,
    pub config_hash: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryConfig {
    /// Stop once ‖∂ₜΨ‖_{0,β} drops below this.
    pub tol: f64,
    pub max_time: f64,
    pub evolve: EvolveConfig,
}

impl Default for StationaryConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_time: 2000.0,
            evolve: EvolveConfig::default(),
        }
    }
}

fn config_hash(problem: &Problem, cfg: &StationaryConfig) -> u64 {
    let mut h = DefaultHasher::new();
    let p = &problem.params;
    let g = &problem.grid;
    for x in [
        p.m(),
        p.r(),
        p.gamma(),
        p.u_plus(),
        p.theta_plus(),
        p.phi_b(),
        g.l1(),
        g.l2(),
        problem.beta,
        cfg.tol,
        cfg.max_time,
        cfg.evolve.cfl,
    ] {
        x.to_bits().hash(&mut h);
    }
    (g.dim(), g.n1(), g.n2()).hash(&mut h);
    for b in g.boundary().bumps() {
        (b.amplitude.to_bits(), b.center.to_bits(), b.width.to_bits()).hash(&mut h);
    }
    h.finish()
}

/// Residuals of the stationary system at `state` (σ is re-solved first).
pub fn stationary_residual(problem: &Problem, state: &mut FieldState, sigma_tol: f64) -> Result<ResidualReport> {
    let cfg = EvolveConfig {
        sigma_tol,
        ..Default::default()
    };
    let mut ev = problem.evolver(cfg)?;
    ev.solve_sigma(state)?;
    let rate = ev.rate(state).to_vec();
    Ok(ResidualReport {
        rate_sup: crate::evolve::RhsOperator::rate_sup(&rate),
        rate_norm: ev.rhs.rate_norm(&rate, problem.beta),
        sigma: ev.sigma_residual(state),
    })
}

/// Evolves from Ψ₀ = 0 until the rate norm drops below `cfg.tol`.
pub fn compute_stationary(
    problem: &Problem,
    cfg: &StationaryConfig,
    records: &mut dyn RecordSink,
    states: &mut dyn StateSink,
) -> Result<StationarySolution> {
    compute_stationary_from(problem, FieldState::zeros(&problem.grid), cfg, records, states)
}

/// As [`compute_stationary`] with a given initial perturbation.
pub fn compute_stationary_from(
    problem: &Problem,
    init: FieldState,
    cfg: &StationaryConfig,
    records: &mut dyn RecordSink,
    states: &mut dyn StateSink,
) -> Result<StationarySolution> {
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParams {
            name: "tol",
            reason: "must be positive".into(),
        });
    }
    let ev_cfg = EvolveConfig {
        tol_steady: cfg.tol,
        t_end: cfg.max_time,
        ..cfg.evolve.clone()
    };
    let mut ev = problem.evolver(ev_cfg)?;
    let mut state = init;
    let summary = ev.evolve(&mut state, records, states)?;
    if summary.stop != StopReason::Steady {
        return Err(Error::NotConverged(format!(
            "‖∂ₜΨ‖ = {:e} at t = {} (target {:e})",
            summary.rate_norm, summary.t, cfg.tol
        )));
    }
    Ok(StationarySolution {
        residual: ResidualReport {
            rate_sup: summary.rate_sup,
            rate_norm: summary.rate_norm,
            sigma: ev.sigma_residual(&state),
        },
        steps: summary.steps,
        t: summary.t,
        config_hash: config_hash(problem, cfg),
        state,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TranslationReport {
    pub t_star: f64,
    /// `d_k = ‖Ψ((k+1)T*) − Ψ(kT*)‖_{1,β}`.
    pub distances: Vec<f64>,
    /// `None` when every distance vanishes (a stationary trajectory).
    pub lambda: Option<f64>,
    pub r_squared: Option<f64>,
}

fn difference_norm(a: &FieldState, b: &FieldState, k: usize, beta: f64, grid: &Grid) -> Result<f64> {
    let diff: Vec<Vec<f64>> = a
        .fields
        .iter()
        .zip(&b.fields)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect())
        .collect();
    let refs: Vec<&[f64]> = diff.iter().map(Vec::as_slice).collect();
    weighted_norm_vec(&refs, k, beta, grid)
}

/// Distances between consecutive snapshots taken `t_star` apart and the
/// exponential rate fitted to them. Distances at round-off level are
/// dropped from the fit.
pub fn translation_cauchy_check(
    samples: &[FieldState],
    t_star: f64,
    grid: &Grid,
    beta: f64,
) -> Result<TranslationReport> {
    if samples.len() < 5 {
        return Err(Error::WindowTooShort(format!(
            "{} snapshots; at least 5 are needed",
            samples.len()
        )));
    }
    for w in samples.windows(2) {
        let gap = w[1].t - w[0].t;
        if (gap - t_star).abs() > 1e-9 * t_star.max(1.0) {
            return Err(Error::WindowTooShort(format!(
                "snapshots at t = {} and {} are not {t_star} apart",
                w[0].t, w[1].t
            )));
        }
    }
    let distances = samples
        .windows(2)
        .map(|w| difference_norm(&w[1], &w[0], 1, beta, grid))
        .collect::<Result<Vec<_>>>()?;
    let scale = samples
        .iter()
        .map(|s| weighted_norm_vec(&s.component_refs(), 1, beta, grid))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let floor = 1e-13 * scale.max(f64::MIN_POSITIVE);
    let pts: Vec<(f64, f64)> = distances
        .iter()
        .enumerate()
        .filter(|(_, &d)| d > floor)
        .map(|(k, &d)| (k as f64 * t_star, -d.ln()))
        .collect();
    let (lambda, r2) = if pts.len() >= 2 {
        let (slope, icpt) = least_squares_slope(&pts);
        (Some(slope), Some(r_squared(&pts, slope, icpt)))
    } else if distances.iter().all(|&d| d <= floor) {
        (None, None)
    } else {
        return Err(Error::WindowTooShort("fewer than two nonzero distances".into()));
    };
    Ok(TranslationReport {
        t_star,
        distances,
        lambda,
        r_squared: r2,
    })
}

/// Least-squares rate of `sup|Ψ(t) − Ψˢ|` over the middle half of the
/// sampled time window.
pub fn fit_lambda(samples: &[FieldState], stationary: &FieldState) -> Result<f64> {
    let (Some(first), Some(last)) = (samples.first(), samples.last()) else {
        return Err(Error::WindowDegenerate("no samples".into()));
    };
    let t: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let dist: Vec<f64> = samples
        .iter()
        .map(|s| {
            s.fields
                .iter()
                .zip(&stationary.fields)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max)
        })
        .collect();
    let span = last.t - first.t;
    fit_exponential_rate(
        &t,
        &dist,
        first.t + 0.25 * span,
        first.t + 0.75 * span,
        10.0 * f64::EPSILON,
    )
}

/// Runs from `init` to `t_end`, keeping snapshots every `t_star`.
pub fn sample_trajectory(
    problem: &Problem,
    init: FieldState,
    t_end: f64,
    t_star: f64,
    evolve: &EvolveConfig,
    records: &mut dyn RecordSink,
) -> Result<(FieldState, Trajectory)> {
    let cfg = EvolveConfig {
        t_end,
        sample_every: Some(t_star),
        tol_steady: 0.0,
        ..evolve.clone()
    };
    let mut ev = problem.evolver(cfg)?;
    let mut state = init;
    let mut traj = Trajectory::default();
    ev.evolve(&mut state, records, &mut traj)?;
    Ok((state, traj))
}
