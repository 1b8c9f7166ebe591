//! Explicit time marching of the perturbation system coupled to the σ
//! solve.
//!
//! In computational coordinates the transport part reads
//! `Ψ_t = −K(1,−M')·∂y₁Ψ − K(0,1)·∂y₂Ψ` with `K(ξ) = (A⁰)⁻¹(ξ·A)`.
//! Each direction is upwinded by splitting `K = K⁺ + K⁻` with spectral
//! projectors built from the closed-form characteristic speeds, so no
//! numerical eigendecomposition happens per node. The wall row uses
//! one-sided stencils only (no boundary condition under supersonic
//! outflow), the truncation row is held at zero, and a short sponge in
//! front of it damps outgoing residue.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::background::BackgroundProfile;
use crate::diagnostics::{DiagnosticContext, DiagnosticRecord, RecordSink};
use crate::elliptic::{NewtonReport, SigmaSolver};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrices::{characteristic_speeds, flux_apply, source_apply, PointState};
use crate::params::PlasmaParams;
use crate::state::{assert_supersonic, FieldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolveConfig {
    pub cfl: f64,
    pub t_end: f64,
    /// Steps between diagnostic records.
    pub diag_stride: usize,
    /// Stop once ‖∂ₜΨ‖_{0,β} falls below this.
    pub tol_steady: f64,
    pub check_supersonic: bool,
    /// Max-norm residual target of each σ solve.
    pub sigma_tol: f64,
    pub sponge_cells: usize,
    /// Land exactly on multiples of this interval and hand the state to
    /// the sample sink.
    pub sample_every: Option<f64>,
}

impl Default for EvolveConfig {
    fn default() -> Self {
        Self {
            cfl: 0.4,
            t_end: 10.0,
            diag_stride: 50,
            tol_steady: 0.0,
            check_supersonic: true,
            sigma_tol: 1e-11,
            sponge_cells: 5,
            sample_every: None,
        }
    }
}

impl EvolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 0.9) {
            return Err(Error::InvalidParams {
                name: "evolve.cfl",
                reason: format!("must lie in (0, 0.9], got {}", self.cfl),
            });
        }
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidParams {
                name: "evolve.t_end",
                reason: format!("must be positive, got {}", self.t_end),
            });
        }
        if self.diag_stride == 0 {
            return Err(Error::InvalidParams {
                name: "evolve.diag_stride",
                reason: "must be at least 1".into(),
            });
        }
        if !(self.sigma_tol >= 1e-12) {
            return Err(Error::InvalidParams {
                name: "evolve.sigma_tol",
                reason: "must be at least 1e-12".into(),
            });
        }
        if let Some(s) = self.sample_every {
            if !(s > 0.0) {
                return Err(Error::InvalidParams {
                    name: "evolve.sample_every",
                    reason: "must be positive".into(),
                });
            }
        }
        Ok(())
    }
}

/// Which terms the right-hand side includes; everything is on by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pub sources: bool,
    pub potential: bool,
}

impl Default for Coupling {
    fn default() -> Self {
        Self {
            sources: true,
            potential: true,
        }
    }
}

/// Spatial operator of the perturbation system.
pub struct RhsOperator<'a> {
    pub params: &'a PlasmaParams,
    pub grid: &'a Grid,
    pub background: &'a BackgroundProfile,
    pub sponge_cells: usize,
    pub coupling: Coupling,
}

#[inline]
fn pos(x: f64) -> f64 {
    x.max(0.0)
}

#[inline]
fn neg(x: f64) -> f64 {
    x.min(0.0)
}

/// `K⁻·dp + K⁺·dm` at one node for direction ξ, written into `out`.
#[allow(clippy::too_many_arguments)]
fn upwind_flux(
    params: &PlasmaParams,
    dim: usize,
    st: &PointState,
    xi: [f64; 2],
    dp: &[f64],
    dm: &[f64],
    out: &mut [f64],
    scratch: &mut [[f64; 4]; 3],
) {
    let n = dim + 2;
    let [lm, l0, lp] = characteristic_speeds(params, dim, st, xi);
    if lp <= 0.0 {
        flux_apply(params, dim, st, xi, dp, out);
        return;
    }
    if lm >= 0.0 {
        flux_apply(params, dim, st, xi, dm, out);
        return;
    }
    out[..n].iter_mut().for_each(|x| *x = 0.0);
    // Π₊d = (K−λ₀)(K−λ₋)d / ((λ₊−λ₀)(λ₊−λ₋)), Π₋ likewise, Π₀ = I − Π₊ − Π₋
    for (d, sel) in [(dp, false), (dm, true)] {
        let pick = |l: f64| if sel { pos(l) } else { neg(l) };
        let (wp, w0, wm) = (pick(lp), pick(l0), pick(lm));
        if wp == 0.0 && w0 == 0.0 && wm == 0.0 {
            continue;
        }
        let [a, b, c] = scratch;
        // a = (K − λ₀)d
        flux_apply(params, dim, st, xi, d, a);
        for k in 0..n {
            a[k] -= l0 * d[k];
        }
        // b = (K − λ₋)a ∝ Π₊d, c = (K − λ₊)a ∝ Π₋d
        flux_apply(params, dim, st, xi, &a[..n], b);
        flux_apply(params, dim, st, xi, &a[..n], c);
        let sp = 1.0 / ((lp - l0) * (lp - lm));
        let sm = 1.0 / ((lm - l0) * (lm - lp));
        for k in 0..n {
            let pp = (b[k] - lm * a[k]) * sp;
            let pm = (c[k] - lp * a[k]) * sm;
            let p0 = d[k] - pp - pm;
            out[k] += wp * pp + w0 * p0 + wm * pm;
        }
    }
}

impl<'a> RhsOperator<'a> {
    pub fn new(params: &'a PlasmaParams, grid: &'a Grid, background: &'a BackgroundProfile) -> Self {
        Self {
            params,
            grid,
            background,
            sponge_cells: 5,
            coupling: Coupling::default(),
        }
    }

    fn sponge(&self, i: usize, max_speed: f64) -> f64 {
        let n1 = self.grid.n1();
        let s = self.sponge_cells;
        if s == 0 || i + s < n1 {
            return 0.0;
        }
        let ramp = (i + s + 1 - n1) as f64 / (s + 1) as f64;
        max_speed / self.grid.h1() * ramp * ramp
    }

    /// ∂ₜΨ at every node, interleaved: `out[p·ncomp + c]`. σ must already
    /// solve the Poisson equation for the current ψ.
    pub fn apply(&self, state: &FieldState, out: &mut [f64]) {
        let grid = self.grid;
        let dim = grid.dim();
        let nc = dim + 2;
        let ny1 = grid.ny1();
        let n1 = grid.n1();
        let (h1, h2) = (grid.h1(), grid.h2());
        let inv_m = 1.0 / self.params.m();
        let fields = &state.fields;
        let sigma = &state.sigma;
        let max_speed = -self.params.u_plus() + self.params.sound_speed(self.params.theta_plus());
        out.par_chunks_mut(ny1 * nc).enumerate().for_each(|(j, col)| {
            let (_, wdm, _) = grid.wall(j);
            let (jp, jm) = (grid.jp(j), grid.jm(j));
            let jpp = grid.jp(jp);
            let jmm = grid.jm(jm);
            let mut psi = [0.0; 4];
            let mut dp = [0.0; 4];
            let mut dmv = [0.0; 4];
            let mut f1 = [0.0; 4];
            let mut f2 = [0.0; 4];
            let mut src = [0.0; 4];
            let mut scratch = [[0.0; 4]; 3];
            let at = |c: usize, i: usize, jj: usize| -> f64 {
                if i > n1 {
                    0.0
                } else {
                    fields[c][jj * ny1 + i]
                }
            };
            for i in 0..ny1 {
                let o = &mut col[i * nc..(i + 1) * nc];
                if i == n1 {
                    o.iter_mut().for_each(|x| *x = 0.0);
                    continue;
                }
                let p = j * ny1 + i;
                let bg = self.background.at(i);
                for c in 0..nc {
                    psi[c] = fields[c][p];
                }
                let st = PointState {
                    v: bg.v + psi[0],
                    u: [bg.u + psi[1], if dim == 2 { psi[2] } else { 0.0 }],
                    theta: bg.theta + psi[nc - 1],
                };
                // normal direction
                for c in 0..nc {
                    dp[c] = (-3.0 * psi[c] + 4.0 * at(c, i + 1, j) - at(c, i + 2, j)) / (2.0 * h1);
                    dmv[c] = match i {
                        0 => dp[c],
                        1 => (psi[c] - at(c, 0, j)) / h1,
                        _ => (3.0 * psi[c] - 4.0 * at(c, i - 1, j) + at(c, i - 2, j)) / (2.0 * h1),
                    };
                }
                upwind_flux(self.params, dim, &st, [1.0, -wdm], &dp, &dmv, &mut f1, &mut scratch);
                if dim == 2 {
                    for c in 0..nc {
                        let f = &fields[c];
                        dp[c] = (-3.0 * psi[c] + 4.0 * f[jp * ny1 + i] - f[jpp * ny1 + i]) / (2.0 * h2);
                        dmv[c] = (3.0 * psi[c] - 4.0 * f[jm * ny1 + i] + f[jmm * ny1 + i]) / (2.0 * h2);
                    }
                    upwind_flux(self.params, dim, &st, [0.0, 1.0], &dp, &dmv, &mut f2, &mut scratch);
                } else {
                    f2 = [0.0; 4];
                }
                for c in 0..nc {
                    o[c] = -f1[c] - f2[c];
                }
                if self.coupling.sources {
                    source_apply(bg, wdm, self.params, dim, &psi, &mut src);
                    for c in 0..nc {
                        o[c] += src[c];
                    }
                }
                if self.coupling.potential {
                    let s = |ii: usize| sigma[j * ny1 + ii];
                    let sy1 = if i == 0 {
                        (-3.0 * s(0) + 4.0 * s(1) - s(2)) / (2.0 * h1)
                    } else {
                        (s(i + 1) - s(i - 1)) / (2.0 * h1)
                    };
                    o[1] += sy1 * inv_m;
                    if dim == 2 {
                        let sy2 = (sigma[jp * ny1 + i] - sigma[jm * ny1 + i]) / (2.0 * h2);
                        o[2] += (sy2 - wdm * sy1) * inv_m;
                    }
                }
                let kappa = self.sponge(i, max_speed);
                if kappa > 0.0 {
                    for c in 0..nc {
                        o[c] -= kappa * psi[c];
                    }
                }
            }
        });
    }

    /// `‖∂ₜΨ‖_{0,β}` of an interleaved rate array.
    pub fn rate_norm(&self, rate: &[f64], beta: f64) -> f64 {
        let nc = self.grid.dim() + 2;
        let sq: Vec<f64> = rate.chunks(nc).map(|c| c.iter().map(|x| x * x).sum()).collect();
        self.grid.integrate_weighted(&sq, beta).sqrt()
    }

    /// sup over nodes and components of |∂ₜΨ|.
    pub fn rate_sup(rate: &[f64]) -> f64 {
        rate.iter().fold(0.0, |a, x| a.max(x.abs()))
    }
}

/// `cfl · min h/(|λ|_max)` over nodes and directions.
pub fn cfl_dt(
    state: &FieldState,
    background: &BackgroundProfile,
    params: &PlasmaParams,
    grid: &Grid,
    cfl: f64,
) -> Result<f64> {
    let dim = grid.dim();
    let mut rate: f64 = 0.0;
    for j in 0..grid.n2() {
        let (_, dm, _) = grid.wall(j);
        for i in 0..grid.ny1() {
            let p = grid.idx(i, j);
            let st = PointState::at(background.at(i), state, p);
            if !(st.theta > 0.0) {
                return Err(Error::TemperatureNonpositive { index: p, value: st.theta });
            }
            let s1 = characteristic_speeds(params, dim, &st, [1.0, -dm]);
            rate = rate.max(s1[0].abs().max(s1[2].abs()) / grid.h1());
            if dim == 2 {
                let s2 = characteristic_speeds(params, dim, &st, [0.0, 1.0]);
                rate = rate.max(s2[0].abs().max(s2[2].abs()) / grid.h2());
            }
        }
    }
    Ok(cfl / rate)
}

/// Receives the state at sample times and after every step.
pub trait StateSink {
    fn sample(&mut self, _state: &FieldState) -> Result<()> {
        Ok(())
    }
    fn after_step(&mut self, _state: &FieldState, _step: usize) -> Result<()> {
        Ok(())
    }
}

/// No-op state sink.
pub struct NoStates;
impl StateSink for NoStates {}

/// Keeps every sampled state.
#[derive(Debug, Default, Clone)]
pub struct Trajectory {
    pub samples: Vec<FieldState>,
}

impl StateSink for Trajectory {
    fn sample(&mut self, state: &FieldState) -> Result<()> {
        self.samples.push(state.clone());
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StopReason {
    EndTime,
    Steady,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvolveSummary {
    pub steps: usize,
    pub t: f64,
    pub stop: StopReason,
    pub rate_norm: f64,
    pub rate_sup: f64,
    pub running_sup: f64,
    pub factorizations: usize,
}

/// Owns the σ solver and scratch space for one trajectory.
pub struct Evolver<'a> {
    pub rhs: RhsOperator<'a>,
    pub config: EvolveConfig,
    pub beta: f64,
    sigma: SigmaSolver,
    rate: Vec<f64>,
    stage: FieldState,
    steps: usize,
    last_newton: NewtonReport,
}

impl<'a> Evolver<'a> {
    pub fn new(
        params: &'a PlasmaParams,
        grid: &'a Grid,
        background: &'a BackgroundProfile,
        beta: f64,
        config: EvolveConfig,
    ) -> Result<Self> {
        config.validate()?;
        let mut rhs = RhsOperator::new(params, grid, background);
        rhs.sponge_cells = config.sponge_cells;
        Ok(Self {
            rhs,
            config,
            beta,
            sigma: SigmaSolver::new(grid, background),
            rate: vec![0.0; grid.npoints() * (grid.dim() + 2)],
            stage: FieldState::zeros(grid),
            steps: 0,
            last_newton: NewtonReport::default(),
        })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Continues a step count, e.g. after resuming from a checkpoint.
    pub fn set_steps(&mut self, steps: usize) {
        self.steps = steps;
    }

    pub fn last_newton(&self) -> NewtonReport {
        self.last_newton
    }

    /// Re-solves σ for the state's ψ (warm-started from the stored σ).
    pub fn solve_sigma(&mut self, state: &mut FieldState) -> Result<NewtonReport> {
        if !self.rhs.coupling.potential {
            return Ok(NewtonReport::default());
        }
        let rep = self.sigma.solve(&state.fields[0], &mut state.sigma, self.config.sigma_tol)?;
        self.last_newton = rep;
        Ok(rep)
    }

    /// Residual of the σ equation at the current state.
    pub fn sigma_residual(&self, state: &FieldState) -> f64 {
        self.sigma.residual(&state.fields[0], &state.sigma)
    }

    /// Evaluates ∂ₜΨ into the internal buffer and returns it.
    pub fn rate(&mut self, state: &FieldState) -> &[f64] {
        self.rhs.apply(state, &mut self.rate);
        &self.rate
    }

    fn check(&self, state: &FieldState) -> Result<()> {
        let (grid, bg) = (self.rhs.grid, self.rhs.background);
        state.check_temperature(bg, grid)?;
        if self.config.check_supersonic {
            assert_supersonic(state, bg, self.rhs.params, grid)?;
        }
        Ok(())
    }

    fn axpy(out: &mut FieldState, base: &FieldState, dt: f64, rate: &[f64]) {
        let nc = base.fields.len();
        for c in 0..nc {
            let (o, b) = (&mut out.fields[c], &base.fields[c]);
            for p in 0..b.len() {
                o[p] = b[p] + dt * rate[p * nc + c];
            }
        }
    }

    /// Two-stage SSP Runge–Kutta step; σ is re-solved after each stage.
    /// Returns the rate norm at the start of the step.
    pub fn step(&mut self, state: &mut FieldState, dt: f64) -> Result<f64> {
        self.rhs.apply(state, &mut self.rate);
        let r0 = self.rhs.rate_norm(&self.rate, self.beta);
        let mut stage = std::mem::replace(&mut self.stage, FieldState { t: 0.0, fields: Vec::new(), sigma: Vec::new() });
        if stage.fields.len() != state.fields.len() {
            stage = state.clone();
        }
        stage.sigma.clone_from(&state.sigma);
        Self::axpy(&mut stage, state, dt, &self.rate);
        stage.t = state.t + dt;
        self.check(&stage)?;
        self.solve_sigma(&mut stage)?;
        self.rhs.apply(&stage, &mut self.rate);
        let nc = state.fields.len();
        for c in 0..nc {
            let (s, t) = (&mut state.fields[c], &stage.fields[c]);
            for p in 0..s.len() {
                s[p] = 0.5 * s[p] + 0.5 * (t[p] + dt * self.rate[p * nc + c]);
            }
        }
        state.sigma.clone_from(&stage.sigma);
        self.stage = stage;
        state.t += dt;
        self.check(state)?;
        self.solve_sigma(state)?;
        self.steps += 1;
        Ok(r0)
    }

    /// Marches until `t_end` or until the rate norm drops below
    /// `tol_steady`. The initial state must satisfy the positivity and
    /// outflow checks; σ is solved for it first.
    pub fn evolve(
        &mut self,
        state: &mut FieldState,
        records: &mut dyn RecordSink,
        states: &mut dyn StateSink,
    ) -> Result<EvolveSummary> {
        let (params, grid, bg) = (self.rhs.params, self.rhs.grid, self.rhs.background);
        self.check(state)?;
        self.solve_sigma(state)?;
        let ctx = DiagnosticContext {
            params,
            background: bg,
            grid,
            beta: self.beta,
        };
        let mut running = 0.0;
        let t_end = self.config.t_end;
        let mut next_sample = self.config.sample_every.map(|s| {
            // first multiple of the interval at or after the current time
            let k = (state.t / s - 1e-9).ceil().max(0.0);
            k * s
        });
        let mut step_in_run = 0usize;
        let emit = |rec: DiagnosticRecord, records: &mut dyn RecordSink, running: &mut f64| -> Result<()> {
            *running = rec.running_sup;
            records.record(&rec)
        };
        loop {
            if let Some(ts) = next_sample {
                if (state.t - ts).abs() <= 1e-9 * ts.max(1.0) {
                    states.sample(state)?;
                    next_sample = Some(ts + self.config.sample_every.unwrap());
                }
            }
            let rate = {
                self.rhs.apply(state, &mut self.rate);
                self.rhs.rate_norm(&self.rate, self.beta)
            };
            let rate_sup = RhsOperator::rate_sup(&self.rate);
            let steady = rate < self.config.tol_steady;
            let done = state.t >= t_end * (1.0 - 1e-12);
            if step_in_run.is_multiple_of(self.config.diag_stride) || steady || done {
                let rec = ctx.record(state, self.steps, rate, running)?;
                emit(rec, records, &mut running)?;
            }
            if steady || done {
                return Ok(EvolveSummary {
                    steps: self.steps,
                    t: state.t,
                    stop: if steady { StopReason::Steady } else { StopReason::EndTime },
                    rate_norm: rate,
                    rate_sup,
                    running_sup: running,
                    factorizations: self.sigma.factorizations(),
                });
            }
            let mut dt = cfl_dt(state, bg, params, grid, self.config.cfl)?;
            dt = dt.min(t_end - state.t);
            if let Some(ts) = next_sample {
                if state.t + dt > ts {
                    dt = ts - state.t;
                }
            }
            self.step(state, dt)?;
            if let Some(ts) = next_sample {
                if (state.t - ts).abs() <= 1e-9 * ts.max(1.0) {
                    state.t = ts;
                }
            }
            step_in_run += 1;
            states.after_step(state, self.steps)?;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::reference_alpha;
    use crate::diagnostics::RunReport;
    use crate::matrices::{assemble_a, assemble_b_h};
    use nalgebra::DVector;

    #[test]
    fn cfl_examples() {
        let p = PlasmaParams::canonical(0.0);
        let grid = Grid::new_1d(2.0, 40).unwrap();
        let bg = BackgroundProfile::uniform(&p, grid.ny1(), 0.75);
        let st = FieldState::zeros(&grid);
        let dt = cfl_dt(&st, &bg, &p, &grid, 0.4).unwrap();
        let want = 0.4 * 0.05 / (2.0 + (5.0f64 / 3.0).sqrt());
        assert!((dt - want).abs() < 1e-15);
        assert!((dt - 0.006078).abs() < 1e-6);
        let coarse = Grid::new_1d(4.0, 40).unwrap();
        assert_eq!(cfl_dt(&st, &bg, &p, &coarse, 0.4).unwrap(), 2.0 * dt);

        let mut hot = st.clone();
        hot.zeta_mut()[7] = 3.0;
        let dt_hot = cfl_dt(&hot, &bg, &p, &grid, 0.4).unwrap();
        let want_hot = 0.4 * 0.05 / (2.0 + (4.0 * 5.0f64 / 3.0).sqrt());
        assert!((dt_hot - want_hot).abs() < 1e-15);
    }

    #[test]
    fn uniform_state_is_exact_fixed_point() {
        let p = PlasmaParams::canonical(0.0);
        let grid = Grid::new_1d(20.0, 64).unwrap();
        let bg = BackgroundProfile::uniform(&p, grid.ny1(), 0.75);
        let mut ev = Evolver::new(&p, &grid, &bg, 0.25, EvolveConfig::default()).unwrap();
        let mut st = FieldState::zeros(&grid);
        for _ in 0..50 {
            ev.step(&mut st, 0.01).unwrap();
        }
        assert_eq!(st.sup_abs(), 0.0);
    }

    #[test]
    fn sheath_background_has_zero_rate() {
        let p = PlasmaParams::canonical(-0.05);
        let alpha = reference_alpha(&p).unwrap();
        for grid in [
            Grid::new_1d(40.0 / alpha, 128).unwrap(),
            Grid::new_2d(40.0 / alpha, 64, 4.0, 16, crate::BoundaryProfile::flat()).unwrap(),
        ] {
            let bg = BackgroundProfile::build(&p, &grid, alpha).unwrap();
            let mut ev = Evolver::new(&p, &grid, &bg, 0.25, EvolveConfig::default()).unwrap();
            let mut st = FieldState::zeros(&grid);
            ev.solve_sigma(&mut st).unwrap();
            let r = ev.rate(&st).to_vec();
            assert_eq!(RhsOperator::rate_sup(&r), 0.0);
        }
    }

    #[test]
    fn first_row_reproduces_assembled_system() {
        // dim 1: all normal speeds are negative, so the discrete derivative
        // is the forward stencil and A⁰·rate = −A¹D⁺Ψ + (0, σ', 0) + BΨ
        let p = PlasmaParams::canonical(-0.05);
        let alpha = reference_alpha(&p).unwrap();
        let grid = Grid::new_1d(40.0 / alpha, 200).unwrap();
        let bg = BackgroundProfile::build(&p, &grid, alpha).unwrap();
        let mut ev = Evolver::new(&p, &grid, &bg, 0.25, EvolveConfig::default()).unwrap();
        let mut st = FieldState::zeros(&grid);
        for c in 0..3 {
            let amp = [0.01, -0.02, 0.015][c];
            st.fields[c] = grid.sample(|y, _| amp * (-(y - 4.0 - c as f64).powi(2) / 2.0).exp() * (1.3 * y).sin());
        }
        ev.solve_sigma(&mut st).unwrap();
        let rate = ev.rate(&st).to_vec();
        let dp = |f: &[f64], i: usize| {
            let at = |k: usize| if k > grid.n1() { 0.0 } else { f[k] };
            (-3.0 * at(i) + 4.0 * at(i + 1) - at(i + 2)) / (2.0 * grid.h1())
        };
        for i in 1..grid.n1() - 6 {
            let ps = PointState::at(bg.at(i), &st, i);
            let a0 = assemble_a(0, &ps, &p, 1).unwrap();
            let a1 = assemble_a(1, &ps, &p, 1).unwrap();
            let (b, _) = assemble_b_h(&ps, bg.at(i), 0.0, &p, 1).unwrap();
            let psi = DVector::from_fn(3, |c, _| st.fields[c][i]);
            let d = DVector::from_fn(3, |c, _| dp(&st.fields[c], i));
            let r = DVector::from_fn(3, |c, _| rate[i * 3 + c]);
            let sig = (st.sigma[i + 1] - st.sigma[i - 1]) / (2.0 * grid.h1());
            let lhs = &a0 * r + &a1 * d - &b * psi;
            let scale = 1.0 + lhs.amax();
            assert!(lhs[0].abs() < 1e-14 * scale, "row {i}: {}", lhs[0]);
            assert!((lhs[1] - sig).abs() < 1e-13 * scale);
            assert!(lhs[2].abs() < 1e-13 * scale);
        }
    }

    #[test]
    fn frozen_advection_translates_pulse() {
        // B, h and σ disabled; the ψ-only initial datum splits into the three
        // characteristic families, each moving at its own speed.
        let p = PlasmaParams::canonical(0.0);
        let mut errs = Vec::new();
        for n in [400usize, 800] {
            let grid = Grid::new_1d(40.0, n).unwrap();
            let bg = BackgroundProfile::uniform(&p, grid.ny1(), 0.75);
            let cfg = EvolveConfig {
                sponge_cells: 0,
                ..Default::default()
            };
            let mut ev = Evolver::new(&p, &grid, &bg, 0.25, cfg).unwrap();
            ev.rhs.coupling = Coupling {
                sources: false,
                potential: false,
            };
            let mut st = FieldState::zeros(&grid);
            // small amplitude so the frozen-coefficient speed u₊ + c applies
            let c = (5.0f64 / 3.0).sqrt();
            let pulse = |y: f64| 1e-6 * (-(y - 25.0).powi(2) / 4.0).exp();
            st.fields[0] = grid.sample(|y, _| pulse(y));
            st.fields[1] = grid.sample(|y, _| c * pulse(y));
            st.fields[2] = grid.sample(|y, _| 2.0 / 3.0 * pulse(y));
            // (1, c, (γ−1)θ) is the right eigenvector for u + c
            let ps = PointState::far_field(&p);
            let mut kv = [0.0; 3];
            flux_apply(&p, 1, &ps, [1.0, 0.0], &[1.0, c, 2.0 / 3.0], &mut kv);
            assert!((kv[0] - (-2.0 + c)).abs() < 1e-14);
            let t_end = 8.0;
            let mut t = 0.0;
            while t < t_end - 1e-12 {
                let dt = cfl_dt(&st, &bg, &p, &grid, 0.4).unwrap().min(t_end - t);
                ev.step(&mut st, dt).unwrap();
                t += dt;
            }
            let shift = (-2.0 + c) * t_end;
            let err = (0..grid.ny1())
                .map(|i| (st.fields[0][i] - pulse(grid.y1(i) - shift)).abs())
                .fold(0.0, f64::max);
            errs.push(err / 1e-6);
        }
        assert!(errs[0] < 0.05, "{errs:?}");
        assert!(errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn hot_initial_state_is_refused() {
        let p = PlasmaParams::canonical(0.0);
        let grid = Grid::new_1d(20.0, 64).unwrap();
        let bg = BackgroundProfile::uniform(&p, grid.ny1(), 0.75);
        let mut ev = Evolver::new(&p, &grid, &bg, 0.25, EvolveConfig::default()).unwrap();
        let mut st = FieldState::zeros(&grid);
        st.zeta_mut()[0] = 10.0;
        let err = ev.evolve(&mut st, &mut RunReport::default(), &mut NoStates).unwrap_err();
        assert!(matches!(err, Error::SupersonicLost { .. }));
        let mut st = FieldState::zeros(&grid);
        st.zeta_mut()[10] = -1.5;
        let err = ev.evolve(&mut st, &mut RunReport::default(), &mut NoStates).unwrap_err();
        assert!(matches!(err, Error::TemperatureNonpositive { .. }));
    }

    #[test]
    fn runs_are_deterministic() {
        let p = PlasmaParams::canonical(-0.05);
        let alpha = reference_alpha(&p).unwrap();
        let grid = Grid::new_1d(40.0 / alpha, 128).unwrap();
        let bg = BackgroundProfile::build(&p, &grid, alpha).unwrap();
        let run = || {
            let cfg = EvolveConfig {
                t_end: 2.0,
                diag_stride: 10,
                ..Default::default()
            };
            let mut ev = Evolver::new(&p, &grid, &bg, 0.25, cfg).unwrap();
            let mut st = FieldState::zeros(&grid);
            st.fields[0] = grid.sample(|y, _| 1e-3 * (-(y - 5.0).powi(2)).exp());
            let mut rep = RunReport::default();
            ev.evolve(&mut st, &mut rep, &mut NoStates).unwrap();
            rep.records
        };
        assert_eq!(run(), run());
    }
}
