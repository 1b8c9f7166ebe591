//! `key = value` run configuration.
//!
//! ```text
//! # canonical sheath
//! m = 1
//! R = 1
//! gamma = 1.6666666666666667
//! u_plus = -2
//! theta_plus = 1
//! phi_b = -0.05
//! dim = 2
//! n1 = 256
//! L2 = 16
//! n2 = 128
//! boundary.kind = gaussian
//! boundary.bumps = 0.5,0,2
//! ```
//!
//! `L1` defaults to 40/α and `beta` to min(α/2, 1/4). Keys under
//! `evolve.`, `init.` and `stationary.` tune the time stepping, the
//! initial perturbation and the long-time limit.

use std::collections::BTreeMap;
use std::path::Path;

use crate::background::{default_depth, reference_alpha};
use crate::boundary::{BoundaryKind, BoundaryProfile};
use crate::error::{Error, Result};
use crate::evolve::EvolveConfig;
use crate::grid::Grid;
use crate::limit::StationaryConfig;
use crate::norms::weighted_norm_vec;
use crate::params::PlasmaParams;
use crate::problem::Problem;
use crate::state::FieldState;

const KNOWN_KEYS: &[&str] = &[
    "m",
    "R",
    "gamma",
    "u_plus",
    "theta_plus",
    "phi_b",
    "beta",
    "dim",
    "L1",
    "n1",
    "L2",
    "n2",
    "boundary.kind",
    "boundary.bumps",
    "evolve.cfl",
    "evolve.t_end",
    "evolve.diag_stride",
    "evolve.tol_steady",
    "evolve.sigma_tol",
    "evolve.check_supersonic",
    "evolve.sponge_cells",
    "evolve.sample_every",
    "init.norm",
    "init.center",
    "init.width",
    "init.psi",
    "init.eta",
    "init.zeta",
    "stationary.tol",
    "stationary.max_time",
    "stationary.t_star",
];

/// Raw key/value pairs in file order-independent form.
#[derive(Debug, Clone, Default)]
struct Table(BTreeMap<String, String>);

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected `key = value`", n + 1)));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KNOWN_KEYS.contains(&k) {
                return Err(Error::Config(format!("line {}: unknown key `{k}`", n + 1)));
            }
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
        }
        Ok(Self(map))
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
        }
    }

    fn req<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.opt(key)?.ok_or_else(|| Error::MissingKey(key.to_string()))
    }
}

/// Gaussian-in-y₁ initial perturbation, scaled to a given `‖·‖_{3,β}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InitSpec {
    pub norm: f64,
    pub center: f64,
    pub width: f64,
    /// Relative weights of ψ, η₁ and ζ.
    pub weights: [f64; 3],
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            norm: 0.0,
            center: 5.0,
            width: 1.5,
            weights: [1.0, 0.5, 0.7],
        }
    }
}

impl InitSpec {
    pub fn build(&self, problem: &Problem) -> Result<FieldState> {
        let grid = &problem.grid;
        let mut st = FieldState::zeros(grid);
        if self.norm == 0.0 {
            return Ok(st);
        }
        let (c, w) = (self.center, self.width);
        let shape = |y: f64| (-((y - c) / w).powi(2)).exp();
        let last = st.ncomp() - 1;
        for (slot, wt) in [(0, self.weights[0]), (1, self.weights[1]), (last, self.weights[2])] {
            st.fields[slot] = grid.sample(|y, _| wt * shape(y));
        }
        let n = weighted_norm_vec(&st.component_refs(), 3, problem.beta, grid)?;
        if !(n > 0.0) {
            return Err(Error::Config("init: all weights are zero".into()));
        }
        for f in &mut st.fields {
            f.iter_mut().for_each(|x| *x *= self.norm / n);
        }
        Ok(st)
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: PlasmaParams,
    pub dim: usize,
    pub l1: Option<f64>,
    pub n1: usize,
    pub l2: f64,
    pub n2: usize,
    pub beta: Option<f64>,
    pub boundary: BoundaryProfile,
    pub evolve: EvolveConfig,
    pub init: InitSpec,
    pub stationary: StationaryConfig,
    /// Snapshot spacing for the translation check.
    pub t_star: f64,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let t = Table::parse(text)?;
        let params = PlasmaParams::new(
            t.req("m")?,
            t.req("R")?,
            t.req("gamma")?,
            t.req("u_plus")?,
            t.req("theta_plus")?,
            t.req("phi_b")?,
        )?;
        let dim: usize = t.req("dim")?;
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dim must be 1 or 2, got {dim}")));
        }
        let (l2, n2) = if dim == 2 {
            (t.req("L2")?, t.req("n2")?)
        } else {
            (t.opt("L2")?.unwrap_or(1.0), t.opt("n2")?.unwrap_or(1))
        };
        let kind = match t.raw("boundary.kind") {
            None => None,
            Some("flat") => Some(BoundaryKind::Flat),
            Some("gaussian") => Some(BoundaryKind::GaussianSum),
            Some(other) => {
                return Err(Error::Config(format!(
                    "`boundary.kind`: expected `flat` or `gaussian`, got `{other}`"
                )))
            }
        };
        let bumps = match t.raw("boundary.bumps") {
            Some(s) => BoundaryProfile::parse_bumps(s)?,
            None => Vec::new(),
        };
        let boundary = match kind {
            Some(BoundaryKind::GaussianSum) => {
                if bumps.is_empty() {
                    return Err(Error::MissingKey("boundary.bumps".into()));
                }
                BoundaryProfile::gaussian_sum(bumps)
            }
            Some(BoundaryKind::Flat) | None if bumps.is_empty() => BoundaryProfile::flat(),
            _ => {
                return Err(Error::Config(
                    "`boundary.bumps` given but `boundary.kind` is not `gaussian`".into(),
                ))
            }
        };
        if dim == 1 && !boundary.is_flat() {
            return Err(Error::Config("a curved boundary needs dim = 2".into()));
        }
        let d = EvolveConfig::default();
        let evolve = EvolveConfig {
            cfl: t.opt("evolve.cfl")?.unwrap_or(d.cfl),
            t_end: t.opt("evolve.t_end")?.unwrap_or(d.t_end),
            diag_stride: t.opt("evolve.diag_stride")?.unwrap_or(d.diag_stride),
            tol_steady: t.opt("evolve.tol_steady")?.unwrap_or(d.tol_steady),
            check_supersonic: t.opt("evolve.check_supersonic")?.unwrap_or(d.check_supersonic),
            sigma_tol: t.opt("evolve.sigma_tol")?.unwrap_or(d.sigma_tol),
            sponge_cells: t.opt("evolve.sponge_cells")?.unwrap_or(d.sponge_cells),
            sample_every: t.opt("evolve.sample_every")?,
        };
        evolve.validate()?;
        let di = InitSpec::default();
        let init = InitSpec {
            norm: t.opt("init.norm")?.unwrap_or(di.norm),
            center: t.opt("init.center")?.unwrap_or(di.center),
            width: t.opt("init.width")?.unwrap_or(di.width),
            weights: [
                t.opt("init.psi")?.unwrap_or(di.weights[0]),
                t.opt("init.eta")?.unwrap_or(di.weights[1]),
                t.opt("init.zeta")?.unwrap_or(di.weights[2]),
            ],
        };
        if !(init.norm >= 0.0 && init.width > 0.0) {
            return Err(Error::Config("init.norm must be ≥ 0 and init.width > 0".into()));
        }
        let ds = StationaryConfig::default();
        let stationary = StationaryConfig {
            tol: t.opt("stationary.tol")?.unwrap_or(ds.tol),
            max_time: t.opt("stationary.max_time")?.unwrap_or(ds.max_time),
            evolve: evolve.clone(),
        };
        Ok(Self {
            params,
            dim,
            l1: t.opt("L1")?,
            n1: t.req("n1")?,
            l2,
            n2,
            beta: t.opt("beta")?,
            boundary,
            evolve,
            init,
            stationary,
            t_star: t.opt("stationary.t_star")?.unwrap_or(4.0),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Grid for a known decay exponent (which fixes the default depth).
    pub fn grid(&self, alpha: f64) -> Result<Grid> {
        let l1 = self.l1.unwrap_or_else(|| default_depth(alpha));
        Grid::new(self.dim, l1, self.n1, self.l2, self.n2, self.boundary.clone())
    }

    pub fn problem(&self) -> Result<Problem> {
        let alpha = reference_alpha(&self.params)?;
        Problem::with_alpha(self.params, self.grid(alpha)?, self.beta, alpha)
    }
}
