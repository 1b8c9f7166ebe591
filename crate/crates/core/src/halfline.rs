//! Monotone stationary sheath on the half line.
//!
//! Mass and entropy conservation give `ρ̃ũ = u₊` and `θ̃ = θ₊ρ̃^{γ−1}`; the
//! momentum equation then integrates to the Bernoulli relation
//!
//! ```text
//! H(ρ) = (m u₊²/2)(ρ⁻² − 1) + (γRθ₊/(γ−1))(ρ^{γ−1} − 1) = φ,
//! ```
//!
//! and the Poisson equation becomes the planar Hamiltonian system
//! `φ'' = W'(φ)` with Sagdeev potential `W(φ) = ∫₀^φ (ρ̃(s) − e^{−s}) ds`.
//! The monotone profile is the orbit homoclinic to 0,
//! `φ' = −sgn(φ)·√(2W(φ))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fit::{fit_exponential_rate, AdaptiveGauss};
use crate::params::PlasmaParams;

/// Density as a function of potential on the branch through ρ = 1.
#[derive(Debug, Clone, Copy)]
pub struct DensityBranch {
    a: f64,
    b: f64,
    gm1: f64,
    delta_sonic: f64,
    h_min: f64,
    dh_at_one: f64,
}

#[inline]
fn pow_m1(delta: f64, p: f64) -> f64 {
    (p * delta.ln_1p()).exp_m1()
}

impl DensityBranch {
    pub fn new(params: &PlasmaParams) -> Result<Self> {
        let mu2 = params.m() * params.u_plus() * params.u_plus();
        let g_rt = params.gamma() * params.r() * params.theta_plus();
        if mu2 <= g_rt {
            // ρ = 1 sits at or past the sonic point
            return Err(Error::BranchExhausted { phi: 0.0, h_min: 0.0 });
        }
        let gm1 = params.gamma() - 1.0;
        let rho_s = (mu2 / g_rt).powf(1.0 / (params.gamma() + 1.0));
        let mut branch = Self {
            a: 0.5 * mu2,
            b: g_rt / gm1,
            gm1,
            delta_sonic: rho_s - 1.0,
            h_min: 0.0,
            dh_at_one: g_rt - mu2,
        };
        branch.h_min = branch.h(branch.delta_sonic);
        Ok(branch)
    }

    /// H(1 + δ), evaluated without cancellation for small δ.
    #[inline]
    pub fn h(&self, delta: f64) -> f64 {
        self.a * pow_m1(delta, -2.0) + self.b * pow_m1(delta, self.gm1)
    }

    /// dH/dρ at ρ = 1 + δ.
    #[inline]
    pub fn dh(&self, delta: f64) -> f64 {
        let rho = 1.0 + delta;
        -2.0 * self.a / (rho * rho * rho) + self.b * self.gm1 * rho.powf(self.gm1 - 1.0)
    }

    /// Minimum of H on the branch (attained at the sonic density).
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    /// dρ/dφ at φ = 0, i.e. 1/(γRθ₊ − m u₊²).
    pub fn slope_at_zero(&self) -> f64 {
        1.0 / self.dh_at_one
    }

    /// ρ̃(φ) − 1 by safeguarded Newton on the decreasing branch.
    pub fn delta(&self, phi: f64) -> Result<f64> {
        if phi == 0.0 {
            return Ok(0.0);
        }
        if !phi.is_finite() || phi <= self.h_min {
            return Err(Error::BranchExhausted {
                phi,
                h_min: self.h_min,
            });
        }
        let (mut lo, mut hi) = if phi > 0.0 {
            let mut lo = -0.5;
            let mut guard = 0;
            while self.h(lo) < phi {
                lo = -1.0 + 0.5 * (1.0 + lo);
                guard += 1;
                if guard > 1000 {
                    return Err(Error::BranchExhausted {
                        phi,
                        h_min: self.h_min,
                    });
                }
            }
            (lo, 0.0)
        } else {
            (0.0, self.delta_sonic)
        };
        let mut x = (phi / self.dh_at_one).clamp(lo, hi);
        for _ in 0..200 {
            let f = self.h(x) - phi;
            if f == 0.0 {
                return Ok(x);
            }
            // H decreasing: f > 0 means x lies left of the root
            if f > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let d = self.dh(x);
            let mut next = x - f / d;
            if !(next > lo && next < hi) || !next.is_finite() {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step <= 2.0 * f64::EPSILON * x.abs() || hi - lo <= 2.0 * f64::EPSILON * x.abs() {
                return Ok(x);
            }
        }
        Ok(x)
    }

    pub fn density(&self, phi: f64) -> Result<f64> {
        Ok(1.0 + self.delta(phi)?)
    }
}

pub fn bernoulli_density(phi: f64, params: &PlasmaParams) -> Result<f64> {
    DensityBranch::new(params)?.density(phi)
}

/// Sagdeev potential evaluator; owns the branch and quadrature rule.
pub struct Sagdeev {
    branch: DensityBranch,
    quad: AdaptiveGauss,
}

impl Sagdeev {
    pub fn new(params: &PlasmaParams) -> Result<Self> {
        Ok(Self {
            branch: DensityBranch::new(params)?,
            quad: AdaptiveGauss::default(),
        })
    }

    pub fn branch(&self) -> &DensityBranch {
        &self.branch
    }

    /// W'(φ) = ρ̃(φ) − e^{−φ}.
    pub fn dw(&self, phi: f64) -> Result<f64> {
        Ok(self.branch.delta(phi)? - (-phi).exp_m1())
    }

    /// W(φ) by adaptive Gauss–Legendre quadrature of W'.
    pub fn w(&self, phi: f64) -> Result<f64> {
        if phi == 0.0 {
            return Ok(0.0);
        }
        self.quad.integrate(|s| self.dw(s), 0.0, phi, 1e-13)
    }

    /// W''(0) = 1 − 1/(m u₊² − γRθ₊).
    pub fn curvature_at_zero(&self) -> f64 {
        1.0 + self.branch.slope_at_zero()
    }
}

pub fn sagdeev_potential(phi: f64, params: &PlasmaParams) -> Result<f64> {
    Sagdeev::new(params)?.w(phi)
}

/// Tabulated half-line stationary solution.
#[derive(Debug, Clone, Serialize)]
pub struct StationaryProfile1D {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub alpha_fit: f64,
}

/// |φ̃| below this fraction of |φ_b| switches to the linearized tail.
const LINEAR_TAIL_FRACTION: f64 = 1e-6;
/// Largest internal integrator step.
const MAX_INTERNAL_STEP: f64 = 0.01;

/// Integrates the homoclinic orbit on `x = i·L1/n1` and reconstructs the
/// fluid fields. `alpha_fit` is left at the linearized rate `√W''(0)`.
pub fn tabulate_profile(params: &PlasmaParams, l1: f64, n1: usize) -> Result<StationaryProfile1D> {
    let margin = params.bohm_margin();
    if margin <= 0.0 {
        return Err(Error::BohmViolated(margin));
    }
    if !(l1 > 0.0) || n1 < 2 {
        return Err(Error::InvalidGrid(format!("bad half-line grid L1={l1}, n1={n1}")));
    }
    let sag = Sagdeev::new(params)?;
    let kappa = sag.curvature_at_zero().sqrt();
    let h = l1 / n1 as f64;
    let x: Vec<f64> = (0..=n1).map(|i| i as f64 * h).collect();
    let phi_b = params.phi_b();
    let mut phi = vec![0.0; n1 + 1];
    let mut dphi = vec![0.0; n1 + 1];

    if phi_b != 0.0 {
        // check the whole range [0, φ_b] lies on the branch
        sag.branch().delta(phi_b)?;
        let sign = phi_b.signum();
        let rate = |p: f64| -> Result<f64> {
            if p * sign < 0.0 {
                return Err(Error::NonMonotone(format!(
                    "orbit crossed zero (phi = {p:e}); step too large"
                )));
            }
            let w = sag.w(p)?;
            if w < 0.0 {
                return Err(Error::NonMonotone(format!(
                    "Sagdeev potential negative (W({p:e}) = {w:e}); |phi_b| too large"
                )));
            }
            Ok(-sign * (2.0 * w).sqrt())
        };
        let substeps = (h / MAX_INTERNAL_STEP).ceil().max(1.0) as usize;
        let hs = h / substeps as f64;
        let switch = LINEAR_TAIL_FRACTION * phi_b.abs();
        let mut p = phi_b;
        let mut tail: Option<(f64, f64)> = None;
        phi[0] = p;
        dphi[0] = rate(p)?;
        for i in 1..=n1 {
            if tail.is_none() {
                for s in 0..substeps {
                    if p.abs() < switch {
                        tail = Some((x[i - 1] + s as f64 * hs, p));
                        break;
                    }
                    let k1 = rate(p)?;
                    let k2 = rate(p + 0.5 * hs * k1)?;
                    let k3 = rate(p + 0.5 * hs * k2)?;
                    let k4 = rate(p + hs * k3)?;
                    let next = p + hs / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                    if next * sign < 0.0 || next.abs() > p.abs() {
                        return Err(Error::NonMonotone(format!(
                            "phi changed direction near x = {}",
                            x[i - 1] + s as f64 * hs
                        )));
                    }
                    p = next;
                }
            }
            match tail {
                Some((x0, p0)) => {
                    phi[i] = p0 * (-kappa * (x[i] - x0)).exp();
                    dphi[i] = -kappa * phi[i];
                }
                None => {
                    phi[i] = p;
                    dphi[i] = rate(p)?;
                }
            }
        }
    }

    let gm1 = params.gamma() - 1.0;
    let mut rho = Vec::with_capacity(n1 + 1);
    for &p in &phi {
        rho.push(sag.branch().density(p)?);
    }
    let u = rho.iter().map(|r| params.u_plus() / r).collect();
    let theta = rho
        .iter()
        .map(|r| params.theta_plus() * r.powf(gm1))
        .collect();
    Ok(StationaryProfile1D {
        x,
        rho,
        u,
        theta,
        phi,
        dphi,
        alpha_fit: kappa,
    })
}

/// Monotone half-line solution with its fitted decay exponent. For
/// `φ_b = 0` the profile is the constant far-field state and `alpha_fit`
/// is the linearized rate.
pub fn solve_stationary_halfline(params: &PlasmaParams, l1: f64, n1: usize) -> Result<StationaryProfile1D> {
    let mut profile = tabulate_profile(params, l1, n1)?;
    if params.phi_b() != 0.0 {
        profile.alpha_fit = fit_decay_alpha(&profile)?;
    }
    Ok(profile)
}

/// Slope of −log|φ̃| over x ∈ [L1/4, L1/2].
pub fn fit_decay_alpha(profile: &StationaryProfile1D) -> Result<f64> {
    let l1 = *profile.x.last().unwrap_or(&0.0);
    fit_exponential_rate(&profile.x, &profile.phi, 0.25 * l1, 0.5 * l1, 1e-10)
}

/// Sup-norm residuals of the four stationary equations, derivatives taken
/// by fourth-order centered differences at interior nodes.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Sp0Residuals {
    pub mass: f64,
    pub momentum: f64,
    pub energy: f64,
    pub poisson: f64,
}

impl Sp0Residuals {
    pub fn max(&self) -> f64 {
        self.mass.max(self.momentum).max(self.energy).max(self.poisson)
    }
}

fn d1_4th(f: &[f64], i: usize, h: f64) -> f64 {
    (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * h)
}

fn d2_4th(f: &[f64], i: usize, h: f64) -> f64 {
    (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2]) / (12.0 * h * h)
}

pub fn profile_residuals(profile: &StationaryProfile1D, params: &PlasmaParams) -> Sp0Residuals {
    let n = profile.x.len();
    let h = profile.x[1] - profile.x[0];
    let (m, r, g) = (params.m(), params.r(), params.gamma());
    let flux: Vec<f64> = profile.rho.iter().zip(&profile.u).map(|(a, b)| a * b).collect();
    let logr: Vec<f64> = profile.rho.iter().map(|v| v.ln()).collect();
    let mut res = Sp0Residuals {
        mass: 0.0,
        momentum: 0.0,
        energy: 0.0,
        poisson: 0.0,
    };
    for i in 2..n.saturating_sub(2) {
        let (u, th) = (profile.u[i], profile.theta[i]);
        let du = d1_4th(&profile.u, i, h);
        let dth = d1_4th(&profile.theta, i, h);
        let mass = d1_4th(&flux, i, h);
        let mom = m * u * du + r * th * d1_4th(&logr, i, h) + r * dth - d1_4th(&profile.phi, i, h);
        let energy = u * dth + (g - 1.0) * th * du;
        let pois = d2_4th(&profile.phi, i, h) - (profile.rho[i] - (-profile.phi[i]).exp());
        res.mass = res.mass.max(mass.abs());
        res.momentum = res.momentum.max(mom.abs());
        res.energy = res.energy.max(energy.abs());
        res.poisson = res.poisson.max(pois.abs());
    }
    res
}
