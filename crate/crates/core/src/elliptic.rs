//! Semilinear Poisson solves on the graph-mapped grid.
//!
//! In computational coordinates the Laplacian reads
//!
//! ```text
//! (1 + M'²)∂y₁y₁ − 2M'∂y₁y₂ + ∂y₂y₂ − M''∂y₁,
//! ```
//!
//! discretized with second-order centered differences (periodic in y₂).
//! Problems take the form `L u − f(u) = s` in the interior with Dirichlet
//! data on the wall row and the truncation row, and are solved by damped
//! Newton. Each linear step is preconditioned Richardson with a banded LU
//! of a frozen Jacobian, refactored when the contraction degrades.

use serde::Serialize;

use crate::background::BackgroundProfile;
use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Transformed Laplacian stored row by row in node numbering.
#[derive(Debug, Clone)]
pub struct MappedLaplacian {
    ny1: usize,
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    interior: Vec<bool>,
    // node -> elimination order and its inverse
    order: Vec<usize>,
    node_of: Vec<usize>,
    band: usize,
}

/// Interleaved ring numbering of a periodic index: 0, n−1, 1, n−2, …,
/// so that periodic neighbours are at most two apart.
fn ring_position(j: usize, n: usize) -> usize {
    if 2 * j < n {
        2 * j
    } else {
        2 * (n - 1 - j) + 1
    }
}

impl MappedLaplacian {
    pub fn new(grid: &Grid) -> Self {
        let (ny1, n2) = (grid.ny1(), grid.n2());
        let n = grid.npoints();
        let (h1, h2) = (grid.h1(), grid.h2());
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        let mut interior = vec![false; n];
        row_ptr.push(0);
        for j in 0..n2 {
            let (_, dm, d2m) = grid.wall(j);
            let (jp, jm) = (grid.jp(j), grid.jm(j));
            for i in 0..ny1 {
                let p = grid.idx(i, j);
                if i > 0 && i < grid.n1() {
                    interior[p] = true;
                    let a = 1.0 + dm * dm;
                    let c1 = a / (h1 * h1);
                    let cf = -d2m / (2.0 * h1);
                    let mut push = |q: usize, v: f64| {
                        cols.push(q);
                        vals.push(v);
                    };
                    push(grid.idx(i - 1, j), c1 - cf);
                    push(grid.idx(i + 1, j), c1 + cf);
                    let mut diag = -2.0 * c1;
                    if grid.dim() == 2 {
                        let c2 = 1.0 / (h2 * h2);
                        diag -= 2.0 * c2;
                        push(grid.idx(i, jm), c2);
                        push(grid.idx(i, jp), c2);
                        let cx = -2.0 * dm / (4.0 * h1 * h2);
                        if cx != 0.0 {
                            push(grid.idx(i + 1, jp), cx);
                            push(grid.idx(i + 1, jm), -cx);
                            push(grid.idx(i - 1, jp), -cx);
                            push(grid.idx(i - 1, jm), cx);
                        }
                    }
                    push(p, diag);
                }
                row_ptr.push(cols.len());
            }
        }
        let mut order = vec![0; n];
        for j in 0..n2 {
            let pos = if grid.dim() == 2 { ring_position(j, n2) } else { 0 };
            for i in 0..ny1 {
                order[grid.idx(i, j)] = i * n2 + pos;
            }
        }
        let mut node_of = vec![0; n];
        for (p, &k) in order.iter().enumerate() {
            node_of[k] = p;
        }
        let band = if grid.dim() == 2 { n2 + 2 } else { 1 };
        Self {
            ny1,
            n,
            row_ptr,
            cols,
            vals,
            interior,
            order,
            node_of,
            band,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn is_interior(&self, p: usize) -> bool {
        self.interior[p]
    }

    /// `(L u)_p` at interior nodes; zero on the Dirichlet rows.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        for p in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[p]..self.row_ptr[p + 1] {
                s += self.vals[k] * u[self.cols[k]];
            }
            out[p] = s;
        }
    }

    /// Banded Jacobian `L − diag(d)` with identity rows on the boundary.
    fn jacobian(&self, d: &[f64]) -> BandMatrix {
        let mut band = BandMatrix::zeros(self.n, self.band, self.band);
        for p in 0..self.n {
            let kp = self.order[p];
            if !self.interior[p] {
                band.add(kp, kp, 1.0);
                continue;
            }
            for k in self.row_ptr[p]..self.row_ptr[p + 1] {
                band.add(kp, self.order[self.cols[k]], self.vals[k]);
            }
            band.add(kp, kp, -d[p]);
        }
        band
    }

    pub fn rows_per_column(&self) -> usize {
        self.ny1
    }
}

/// Outcome of a Newton solve.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub residual: f64,
    pub linear_iterations: usize,
    pub factorizations: usize,
}

/// Newton solver for `L u − f(u) = s` with reusable frozen factorization.
pub struct SemilinearSolver {
    lap: MappedLaplacian,
    lu: Option<BandLu>,
    work: Vec<f64>,
    factorizations: usize,
}

const MAX_NEWTON: usize = 50;
const MAX_HALVINGS: usize = 8;
const LINEAR_RTOL: f64 = 1e-2;

impl SemilinearSolver {
    pub fn new(grid: &Grid) -> Self {
        let lap = MappedLaplacian::new(grid);
        let n = lap.len();
        Self {
            lap,
            lu: None,
            work: vec![0.0; n],
            factorizations: 0,
        }
    }

    pub fn laplacian(&self) -> &MappedLaplacian {
        &self.lap
    }

    /// Total factorizations performed over the solver's lifetime.
    pub fn factorizations(&self) -> usize {
        self.factorizations
    }

    fn residual<F>(&self, u: &[f64], s: &[f64], boundary: &[f64], f: &F, out: &mut [f64]) -> f64
    where
        F: Fn(usize, f64) -> (f64, f64),
    {
        self.lap.apply(u, out);
        let mut sup: f64 = 0.0;
        for p in 0..u.len() {
            out[p] = if self.lap.interior[p] {
                out[p] - f(p, u[p]).0 - s[p]
            } else {
                u[p] - boundary[p]
            };
            if !out[p].is_finite() {
                return f64::INFINITY;
            }
            sup = sup.max(out[p].abs());
        }
        sup
    }

    fn refactor(&mut self, diag: &[f64]) -> Result<()> {
        self.lu = Some(self.lap.jacobian(diag).factor()?);
        self.factorizations += 1;
        Ok(())
    }

    fn precondition(&mut self, r: &[f64], out: &mut [f64]) {
        let lu = self.lu.as_ref().expect("factorized");
        for (k, &p) in self.lap.node_of.iter().enumerate() {
            self.work[k] = r[p];
        }
        lu.solve_in_place(&mut self.work);
        for (k, &p) in self.lap.node_of.iter().enumerate() {
            out[p] = self.work[k];
        }
    }

    /// `J x = L x − d⊙x` (identity on boundary rows).
    fn jac_apply(&self, d: &[f64], x: &[f64], out: &mut [f64]) {
        self.lap.apply(x, out);
        for p in 0..x.len() {
            out[p] = if self.lap.interior[p] { out[p] - d[p] * x[p] } else { x[p] };
        }
    }

    /// Solves in place starting from `u`. `f(p, u)` returns the nonlinearity
    /// and its derivative; `boundary` holds Dirichlet values at boundary
    /// rows (entries elsewhere are ignored).
    pub fn solve<F>(&mut self, u: &mut [f64], s: &[f64], boundary: &[f64], f: F, tol: f64) -> Result<NewtonReport>
    where
        F: Fn(usize, f64) -> (f64, f64),
    {
        let n = u.len();
        let mut r = vec![0.0; n];
        let mut res = self.residual(u, s, boundary, &f, &mut r);
        let mut report = NewtonReport {
            residual: res,
            ..Default::default()
        };
        if res <= tol {
            return Ok(report);
        }
        let mut diag = vec![0.0; n];
        let mut delta = vec![0.0; n];
        let mut lin_r = vec![0.0; n];
        let mut corr = vec![0.0; n];
        let mut trial = vec![0.0; n];
        let mut r_trial = vec![0.0; n];
        let start_fact = self.factorizations;
        for it in 0..MAX_NEWTON {
            for p in 0..n {
                diag[p] = if self.lap.interior[p] { f(p, u[p]).1 } else { 0.0 };
            }
            if self.lu.is_none() {
                self.refactor(&diag)?;
            }
            // J δ = −r by Richardson on the frozen factorization
            delta.iter_mut().for_each(|x| *x = 0.0);
            // forcing term 10⁻²·‖r‖ relative to ‖r‖, floored near the target
            let target = (LINEAR_RTOL * res * res.min(1.0)).max(0.1 * tol);
            let mut prev = res;
            let mut sweeps = 0;
            let mut refactored = false;
            loop {
                self.jac_apply(&diag, &delta, &mut lin_r);
                let mut lin = 0.0f64;
                for p in 0..n {
                    lin_r[p] = -r[p] - lin_r[p];
                    lin = lin.max(lin_r[p].abs());
                }
                if lin <= target || (refactored && sweeps >= 30) {
                    break;
                }
                if sweeps > 0 && (lin > 0.5 * prev || sweeps >= 30) && !refactored {
                    self.refactor(&diag)?;
                    refactored = true;
                    sweeps = 0;
                }
                prev = lin;
                self.precondition(&lin_r, &mut corr);
                for p in 0..n {
                    delta[p] += corr[p];
                }
                report.linear_iterations += 1;
                sweeps += 1;
            }
            let mut step = 1.0;
            let mut accepted = false;
            for _ in 0..=MAX_HALVINGS {
                for p in 0..n {
                    trial[p] = u[p] + step * delta[p];
                }
                let rt = self.residual(&trial, s, boundary, &f, &mut r_trial);
                if rt <= 0.5 * res || rt <= tol {
                    u.copy_from_slice(&trial);
                    std::mem::swap(&mut r, &mut r_trial);
                    res = rt;
                    accepted = true;
                    break;
                }
                step *= 0.5;
            }
            report.iterations = it + 1;
            report.residual = res;
            report.factorizations = self.factorizations - start_fact;
            if !accepted {
                return Err(Error::NewtonDiverged {
                    residual: res,
                    iterations: it + 1,
                });
            }
            if res <= tol {
                return Ok(report);
            }
        }
        Err(Error::NewtonDiverged {
            residual: res,
            iterations: MAX_NEWTON,
        })
    }
}

/// Solver for the potential perturbation
/// `Δσ − σ = ψ + g₀ + g₁(σ) + g₂`, with σ = 0 on the wall and at depth L1.
///
/// Using `σ + g₁(σ) = e^{−φ̃}(1 − e^{−σ})` and `ψ + g₀ = e^{ṽ}(e^ψ − 1)`,
/// the equation becomes `Lσ − e^{−φ̃}(1 − e^{−σ}) = e^{ṽ}(e^ψ − 1) + g₂`.
pub struct SigmaSolver {
    inner: SemilinearSolver,
    ny1: usize,
    exp_neg_phi: Vec<f64>,
    exp_v: Vec<f64>,
    g2: Vec<f64>,
    zeros: Vec<f64>,
    source: Vec<f64>,
}

impl SigmaSolver {
    pub fn new(grid: &Grid, background: &BackgroundProfile) -> Self {
        let ny1 = grid.ny1();
        let exp_neg_phi = (0..ny1).map(|i| (-background.at(i).phi).exp()).collect();
        let exp_v = (0..ny1).map(|i| background.at(i).v.exp()).collect();
        let mut g2 = grid.zeros();
        for j in 0..grid.n2() {
            let (_, dm, d2m) = grid.wall(j);
            for i in 0..ny1 {
                let b = background.at(i);
                g2[grid.idx(i, j)] = -b.d2phi * dm * dm + b.dphi * d2m;
            }
        }
        Self {
            inner: SemilinearSolver::new(grid),
            ny1,
            exp_neg_phi,
            exp_v,
            g2,
            zeros: grid.zeros(),
            source: grid.zeros(),
        }
    }

    pub fn factorizations(&self) -> usize {
        self.inner.factorizations()
    }

    /// Solves for σ given ψ, using the incoming σ as the initial guess.
    pub fn solve(&mut self, psi: &[f64], sigma: &mut [f64], tol: f64) -> Result<NewtonReport> {
        let ny1 = self.ny1;
        for p in 0..psi.len() {
            self.source[p] = self.exp_v[p % ny1] * psi[p].exp_m1() + self.g2[p];
        }
        for (p, s) in sigma.iter_mut().enumerate() {
            if !self.inner.lap.interior[p] {
                *s = 0.0;
            }
        }
        let e = &self.exp_neg_phi;
        let f = |p: usize, s: f64| {
            let ep = e[p % ny1];
            (-ep * (-s).exp_m1(), ep * (-s).exp())
        };
        self.inner.solve(sigma, &self.source, &self.zeros, f, tol)
    }

    /// Residual of the σ-equation, sup over interior nodes.
    pub fn residual(&self, psi: &[f64], sigma: &[f64]) -> f64 {
        let mut lap = vec![0.0; sigma.len()];
        self.inner.lap.apply(sigma, &mut lap);
        let mut sup: f64 = 0.0;
        for p in 0..sigma.len() {
            if self.inner.lap.interior[p] {
                let i = p % self.ny1;
                let r = lap[p]
                    + self.exp_neg_phi[i] * (-sigma[p]).exp_m1()
                    - self.exp_v[i] * psi[p].exp_m1()
                    - self.g2[p];
                sup = sup.max(r.abs());
            }
        }
        sup
    }
}

/// One-shot σ solve from a zero initial guess.
pub fn solve_sigma(grid: &Grid, background: &BackgroundProfile, psi: &[f64], tol: f64) -> Result<(Vec<f64>, NewtonReport)> {
    let mut solver = SigmaSolver::new(grid, background);
    let mut sigma = grid.zeros();
    let report = solver.solve(psi, &mut sigma, tol)?;
    Ok((sigma, report))
}

/// Full potential from `Δφ = ρ − e^{−φ}`, φ = φ_b on the wall and 0 at
/// depth L1.
pub fn solve_potential_nonlinear(rho: &[f64], phi_b: f64, grid: &Grid, tol: f64) -> Result<(Vec<f64>, NewtonReport)> {
    if let Some(p) = rho.iter().position(|r| !(*r > 0.0)) {
        return Err(Error::PositivityFailed(format!("density {} at node {p}", rho[p])));
    }
    let mut solver = SemilinearSolver::new(grid);
    let mut boundary = grid.zeros();
    for j in 0..grid.n2() {
        boundary[grid.idx(0, j)] = phi_b;
    }
    let mut phi = boundary.clone();
    let f = |_: usize, u: f64| (-(-u).exp(), (-u).exp());
    let report = solver.solve(&mut phi, rho, &boundary, f, tol)?;
    Ok((phi, report))
}

/// Lower/upper potential bounds and how far the solution sits inside them.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BoundsReport {
    pub upper: f64,
    pub lower: f64,
    pub upper_margin: f64,
    pub lower_margin: f64,
}

impl BoundsReport {
    pub fn margin(&self) -> f64 {
        self.upper_margin.min(self.lower_margin)
    }
}

/// Checks `−M₂ ≤ σ + φ̃ ≤ M₁` with `M₁ = max{sup|φ̃|, 1 − inf ṽ}` and
/// `M₂ = max{sup|φ̃|, 1 + sup ṽ}`.
pub fn poisson_bounds_check(sigma: &[f64], background: &BackgroundProfile, grid: &Grid) -> Result<BoundsReport> {
    let sup_phi = background.sup_abs_phi();
    let m1 = sup_phi.max(1.0 - background.min_v());
    let m2 = sup_phi.max(1.0 + background.max_v());
    let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..grid.n2() {
        for i in 0..grid.ny1() {
            let p = grid.idx(i, j);
            let total = sigma[p] + background.at(i).phi;
            if !(total <= m1 && total >= -m2) {
                return Err(Error::BoundsViolated {
                    index: p,
                    value: total,
                    lower: -m2,
                    upper: m1,
                });
            }
            hi = hi.max(total);
            lo = lo.min(total);
        }
    }
    Ok(BoundsReport {
        upper: m1,
        lower: -m2,
        upper_margin: m1 - hi,
        lower_margin: lo + m2,
    })
}
