//! Wall graph `x₁ = M(x₂)`: flat, or a finite sum of Gaussian bumps.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl Bump {
    pub fn new(amplitude: f64, center: f64, width: f64) -> Result<Self> {
        if !(amplitude.is_finite() && center.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::InvalidParams {
                name: "boundary.bumps",
                reason: format!("bad bump (a={amplitude}, c={center}, w={width})"),
            });
        }
        Ok(Self {
            amplitude,
            center,
            width,
        })
    }

    fn value(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        self.amplitude * (-z * z).exp()
    }

    fn d1(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        -2.0 * z / self.width * self.amplitude * (-z * z).exp()
    }

    fn d2(&self, s: f64) -> f64 {
        let z = (s - self.center) / self.width;
        (4.0 * z * z - 2.0) / (self.width * self.width) * self.amplitude * (-z * z).exp()
    }

    /// max |M'| of this bump alone, attained at c ± w/√2.
    fn max_abs_slope(&self) -> f64 {
        std::f64::consts::SQRT_2 * self.amplitude.abs() / self.width * (-0.5f64).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Flat,
    GaussianSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryProfile {
    kind: BoundaryKind,
    bumps: Vec<Bump>,
}

impl BoundaryProfile {
    pub fn flat() -> Self {
        Self {
            kind: BoundaryKind::Flat,
            bumps: Vec::new(),
        }
    }

    pub fn gaussian_sum(bumps: Vec<Bump>) -> Self {
        Self {
            kind: BoundaryKind::GaussianSum,
            bumps,
        }
    }

    pub fn kind(&self) -> BoundaryKind {
        self.kind
    }

    pub fn bumps(&self) -> &[Bump] {
        &self.bumps
    }

    pub fn is_flat(&self) -> bool {
        self.bumps.iter().all(|b| b.amplitude == 0.0)
    }

    pub fn m(&self, s: f64) -> f64 {
        self.bumps.iter().map(|b| b.value(s)).sum()
    }

    pub fn dm(&self, s: f64) -> f64 {
        self.bumps.iter().map(|b| b.d1(s)).sum()
    }

    pub fn d2m(&self, s: f64) -> f64 {
        self.bumps.iter().map(|b| b.d2(s)).sum()
    }

    /// sup |M'| over the real line: a dense sample covering every bump plus
    /// the analytic extremal points of each bump.
    pub fn max_abs_slope(&self) -> f64 {
        if self.is_flat() {
            return 0.0;
        }
        let lo = self
            .bumps
            .iter()
            .map(|b| b.center - 8.0 * b.width)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .bumps
            .iter()
            .map(|b| b.center + 8.0 * b.width)
            .fold(f64::NEG_INFINITY, f64::max);
        let n = 20_000;
        let mut best = (0..=n)
            .map(|k| self.dm(lo + (hi - lo) * k as f64 / n as f64).abs())
            .fold(0.0, f64::max);
        for b in &self.bumps {
            let off = b.width / std::f64::consts::SQRT_2;
            best = best.max(self.dm(b.center - off).abs());
            best = best.max(self.dm(b.center + off).abs());
        }
        if self.bumps.len() == 1 {
            best = best.max(self.bumps[0].max_abs_slope());
        }
        best
    }

    /// Parses `a,c,w; a,c,w; ...`.
    pub fn parse_bumps(text: &str) -> Result<Vec<Bump>> {
        let mut out = Vec::new();
        for chunk in text.split(';').map(str::trim).filter(|c| !c.is_empty()) {
            let vals: Vec<f64> = chunk
                .split(',')
                .map(|v| {
                    v.trim().parse::<f64>().map_err(|_| {
                        Error::Config(format!("boundary.bumps: cannot parse `{}`", v.trim()))
                    })
                })
                .collect::<Result<_>>()?;
            if vals.len() != 3 {
                return Err(Error::Config(format!(
                    "boundary.bumps: expected a,c,w triple, got `{chunk}`"
                )));
            }
            out.push(Bump::new(vals[0], vals[1], vals[2])?);
        }
        Ok(out)
    }
}
