//! Least-squares exponential-rate fits and Gauss–Legendre quadrature.

use crate::error::{Error, Result};

/// Least-squares slope of `−ln|v|` against `t` over samples with
/// `lo ≤ t ≤ hi`. Every sample in the window must satisfy `|v| > floor`.
pub fn fit_exponential_rate(t: &[f64], v: &[f64], lo: f64, hi: f64, floor: f64) -> Result<f64> {
    let mut pts = Vec::new();
    for (&ti, &vi) in t.iter().zip(v) {
        if ti < lo || ti > hi {
            continue;
        }
        if !(vi.abs() > floor) || !vi.is_finite() {
            return Err(Error::WindowDegenerate(format!(
                "|value| = {:e} at t = {ti} is not above {floor:e}",
                vi.abs()
            )));
        }
        pts.push((ti, -vi.abs().ln()));
    }
    if pts.len() < 3 {
        return Err(Error::WindowDegenerate(format!(
            "only {} samples in [{lo}, {hi}]",
            pts.len()
        )));
    }
    Ok(least_squares_slope(&pts).0)
}

/// Slope and intercept of the least-squares line through `pts`.
pub fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Coefficient of determination of a line fit.
pub fn r_squared(pts: &[(f64, f64)], slope: f64, intercept: f64) -> f64 {
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

pub struct AdaptiveGauss {
    low: (Vec<f64>, Vec<f64>),
    high: (Vec<f64>, Vec<f64>),
}

impl Default for AdaptiveGauss {
    fn default() -> Self {
        Self {
            low: gauss_legendre(5),
            high: gauss_legendre(10),
        }
    }
}

impl AdaptiveGauss {
    fn rule<F: FnMut(f64) -> Result<f64>>(
        rule: &(Vec<f64>, Vec<f64>),
        f: &mut F,
        a: f64,
        b: f64,
    ) -> Result<f64> {
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut s = 0.0;
        for (x, w) in rule.0.iter().zip(&rule.1) {
            s += w * f(mid + half * x)?;
        }
        Ok(s * half)
    }

    /// ∫ₐᵇ f with relative tolerance `rtol` (5- vs 10-point comparison,
    /// bisecting until they agree).
    pub fn integrate<F: FnMut(f64) -> Result<f64>>(&self, mut f: F, a: f64, b: f64, rtol: f64) -> Result<f64> {
        self.recurse(&mut f, a, b, rtol, 0)
    }

    fn recurse<F: FnMut(f64) -> Result<f64>>(
        &self,
        f: &mut F,
        a: f64,
        b: f64,
        rtol: f64,
        depth: usize,
    ) -> Result<f64> {
        let lo = Self::rule(&self.low, f, a, b)?;
        let hi = Self::rule(&self.high, f, a, b)?;
        if (hi - lo).abs() <= rtol * hi.abs() || depth >= 40 || hi == lo {
            return Ok(hi);
        }
        let m = 0.5 * (a + b);
        Ok(self.recurse(f, a, m, rtol, depth + 1)? + self.recurse(f, m, b, rtol, depth + 1)?)
    }
}
