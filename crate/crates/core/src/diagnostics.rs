//! Weighted energy, per-step diagnostic records and the NDJSON run log.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::background::BackgroundProfile;
use crate::elliptic::poisson_bounds_check;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::matrices::wall_margins;
use crate::norms::{sup_abs, weighted_norm, weighted_norm_vec};
use crate::params::PlasmaParams;
use crate::state::{local_supersonic_margin, FieldState};

pub const SCHEMA_VERSION: u32 = 1;

/// `∫ e^{βy₁}[ψ² + ⟨A⁰Ψ,Ψ⟩ + m(∇·η)² + Rθ|∇ψ|² + R/((γ−1)θ)|∇ζ|²] dx`
/// with θ = θ̃ + ζ.
pub fn energy_functional(
    state: &FieldState,
    params: &PlasmaParams,
    background: &BackgroundProfile,
    grid: &Grid,
    beta: f64,
) -> Result<f64> {
    state.check_temperature(background, grid)?;
    let dim = grid.dim();
    let (m, r, gm1) = (params.m(), params.r(), params.gamma() - 1.0);
    let grad_psi = grid.grad(state.psi());
    let grad_zeta = grid.grad(state.zeta());
    let mut div = grid.zeros();
    for k in 0..dim {
        let d = grid.d_x(k, state.eta(k));
        for (a, b) in div.iter_mut().zip(&d) {
            *a += b;
        }
    }
    let mut integrand = grid.zeros();
    for j in 0..grid.n2() {
        for i in 0..grid.ny1() {
            let p = grid.idx(i, j);
            let th = background.at(i).theta + state.zeta()[p];
            let psi = state.psi()[p];
            let zeta = state.zeta()[p];
            let eta2: f64 = (0..dim).map(|k| state.eta(k)[p].powi(2)).sum();
            let gpsi: f64 = grad_psi.iter().map(|g| g[p] * g[p]).sum();
            let gzeta: f64 = grad_zeta.iter().map(|g| g[p] * g[p]).sum();
            let a0 = r * th * psi * psi + m * eta2 + r / (gm1 * th) * zeta * zeta;
            integrand[p] = psi * psi + a0 + m * div[p] * div[p] + r * th * gpsi + r / (gm1 * th) * gzeta;
        }
    }
    Ok(grid.integrate_weighted(&integrand, beta))
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub schema: u32,
    pub step: usize,
    pub t: f64,
    /// ‖Ψ‖_{k,β}, k = 0..3
    pub psi_norms: [f64; 4],
    /// ‖σ‖_{k,β}, k = 0..2
    pub sigma_norms: [f64; 3],
    /// ‖σ‖²_{1,β} / ‖ψ‖²_{0,β}, 0 when ψ vanishes
    pub screening_ratio: f64,
    pub energy: f64,
    pub sup_psi: f64,
    pub sup_sigma: f64,
    /// min over wall nodes of min-eig F[V, n]
    pub wall_flux_min_eig: f64,
    /// min over wall nodes of the slowest normal characteristic speed
    pub wall_normal_speed: f64,
    pub supersonic_margin: f64,
    pub bounds_margin: f64,
    /// running sup of ‖Ψ‖_{3,β}
    pub running_sup: f64,
    /// ‖∂ₜΨ‖_{0,β}
    pub rate_norm: f64,
}

pub struct DiagnosticContext<'a> {
    pub params: &'a PlasmaParams,
    pub background: &'a BackgroundProfile,
    pub grid: &'a Grid,
    pub beta: f64,
}

impl DiagnosticContext<'_> {
    pub fn record(&self, state: &FieldState, step: usize, rate_norm: f64, running_sup: f64) -> Result<DiagnosticRecord> {
        let (grid, beta) = (self.grid, self.beta);
        let comps = state.component_refs();
        let mut psi_norms = [0.0; 4];
        for (k, slot) in psi_norms.iter_mut().enumerate() {
            *slot = weighted_norm_vec(&comps, k, beta, grid)?;
        }
        let mut sigma_norms = [0.0; 3];
        for (k, slot) in sigma_norms.iter_mut().enumerate() {
            *slot = weighted_norm(&state.sigma, k, beta, grid)?;
        }
        let psi0 = weighted_norm(state.psi(), 0, beta, grid)?;
        let screening_ratio = if psi0 > 0.0 {
            (sigma_norms[1] / psi0).powi(2)
        } else {
            0.0
        };
        let (fmin, smin) = wall_margins(state, self.background, self.params, grid)?;
        let bounds = poisson_bounds_check(&state.sigma, self.background, grid)?;
        Ok(DiagnosticRecord {
            schema: SCHEMA_VERSION,
            step,
            t: state.t,
            psi_norms,
            sigma_norms,
            screening_ratio,
            energy: energy_functional(state, self.params, self.background, grid, beta)?,
            sup_psi: state.sup_abs(),
            sup_sigma: sup_abs(&state.sigma),
            wall_flux_min_eig: fmin,
            wall_normal_speed: smin,
            supersonic_margin: local_supersonic_margin(state, self.background, self.params, grid)?,
            bounds_margin: bounds.margin(),
            running_sup: running_sup.max(psi_norms[3]),
            rate_norm,
        })
    }
}

/// Receives records as they are produced.
pub trait RecordSink {
    fn record(&mut self, rec: &DiagnosticRecord) -> Result<()>;
}

/// Keeps records in memory.
#[derive(Debug, Default, Clone)]
pub struct RunReport {
    pub records: Vec<DiagnosticRecord>,
}

impl RecordSink for RunReport {
    fn record(&mut self, rec: &DiagnosticRecord) -> Result<()> {
        self.records.push(rec.clone());
        Ok(())
    }
}

impl RunReport {
    /// `sup_t ‖Ψ‖²_{0,β} / (‖Ψ₀‖²_{0,β} + |φ_b|)`.
    pub fn bound_constant(&self, phi_b: f64) -> Option<f64> {
        let first = self.records.first()?;
        let sup = self
            .records
            .iter()
            .map(|r| r.psi_norms[0].powi(2))
            .fold(0.0, f64::max);
        Some(sup / (first.psi_norms[0].powi(2) + phi_b.abs()))
    }

    /// Whether the energy is nonincreasing after the first `skip` fraction
    /// of the run (within a relative slack).
    pub fn energy_nonincreasing_after(&self, skip: f64, slack: f64) -> bool {
        let Some(last) = self.records.last() else {
            return true;
        };
        let t0 = self.records[0].t + skip * (last.t - self.records[0].t);
        let tail: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.t >= t0)
            .map(|r| r.energy)
            .collect();
        tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + slack))
    }
}

/// Append-only NDJSON log; each record is flushed as written.
pub struct NdjsonSink {
    file: File,
}

impl NdjsonSink {
    pub fn create(path: &Path) -> Result<Self> {
        Ok(Self {
            file: File::create(path)?,
        })
    }

    pub fn append(path: &Path) -> Result<Self> {
        Ok(Self {
            file: std::fs::OpenOptions::new().create(true).append(true).open(path)?,
        })
    }
}

impl RecordSink for NdjsonSink {
    fn record(&mut self, rec: &DiagnosticRecord) -> Result<()> {
        let line = serde_json::to_string(rec)?;
        writeln!(self.file, "{line}")?;
        self.file.flush()?;
        Ok(())
    }
}

/// Parses a run log line by line, skipping a torn final line.
pub fn read_ndjson(path: &Path) -> Result<Vec<DiagnosticRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<std::io::Result<_>>()?;
    let mut out = Vec::new();
    for (n, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<DiagnosticRecord>(line) {
            Ok(r) => {
                if r.schema != SCHEMA_VERSION {
                    return Err(Error::Config(format!(
                        "line {}: schema {} unsupported",
                        n + 1,
                        r.schema
                    )));
                }
                out.push(r);
            }
            Err(_) if n + 1 == lines.len() => break,
            Err(e) => return Err(Error::Io(format!("line {}: {e}", n + 1))),
        }
    }
    Ok(out)
}

/// Plain-text summary of a run log.
pub fn render_summary(records: &[DiagnosticRecord]) -> String {
    let mut s = String::new();
    let Some(first) = records.first() else {
        return "no records\n".into();
    };
    let last = records.last().unwrap();
    let _ = writeln!(s, "records            {}", records.len());
    let _ = writeln!(s, "time span          {:.6} .. {:.6}", first.t, last.t);
    let _ = writeln!(s, "steps              {} .. {}", first.step, last.step);
    for k in 0..4 {
        let _ = writeln!(
            s,
            "|Psi|_{k},beta       {:.6e} -> {:.6e}",
            first.psi_norms[k], last.psi_norms[k]
        );
    }
    let _ = writeln!(s, "energy             {:.6e} -> {:.6e}", first.energy, last.energy);
    let ratio = records.iter().map(|r| r.screening_ratio).fold(0.0, f64::max);
    let _ = writeln!(s, "max sigma/psi      {ratio:.6e}");
    let _ = writeln!(s, "sup|sigma|         {:.6e} -> {:.6e}", first.sup_sigma, last.sup_sigma);
    let min = |f: fn(&DiagnosticRecord) -> f64| records.iter().map(f).fold(f64::INFINITY, f64::min);
    let _ = writeln!(s, "min wall F eig     {:.6e}", min(|r| r.wall_flux_min_eig));
    let _ = writeln!(s, "min normal speed   {:.6e}", min(|r| r.wall_normal_speed));
    let _ = writeln!(s, "min supersonic     {:.6e}", min(|r| r.supersonic_margin));
    let _ = writeln!(s, "min bounds margin  {:.6e}", min(|r| r.bounds_margin));
    let _ = writeln!(s, "N_3,beta           {:.6e}", last.running_sup);
    let _ = writeln!(s, "final rate norm    {:.6e}", last.rate_norm);
    s
}

/// Gnuplot commands plotting the log's norm histories.
pub fn render_plot_script(log_name: &str) -> String {
    format!(
        "# gnuplot script; needs jq on PATH\n\
         set logscale y\n\
         set xlabel 't'\n\
         set key top right\n\
         data = \"< jq -r '[.t, .psi_norms[0], .psi_norms[3], .energy, .sup_sigma, .rate_norm] | @tsv' {log_name}\"\n\
         plot data using 1:2 with lines title '|Psi|_0', \\\n\
         \x20    data using 1:3 with lines title '|Psi|_3', \\\n\
         \x20    data using 1:4 with lines title 'energy', \\\n\
         \x20    data using 1:5 with lines title 'sup|sigma|', \\\n\
         \x20    data using 1:6 with lines title '|dPsi/dt|_0'\n\
         pause -1\n"
    )
}
