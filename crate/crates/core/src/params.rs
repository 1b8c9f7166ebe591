//! Physical constants, far-field data and the admissibility margins built
//! from them.

use serde::{Deserialize, Serialize};

use crate::boundary::BoundaryProfile;
use crate::error::{Error, Result};

/// Ion mass, gas constant, heat-capacity ratio, far-field state and wall
/// potential. Validated at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasmaParams {
    m: f64,
    r: f64,
    gamma: f64,
    u_plus: f64,
    theta_plus: f64,
    phi_b: f64,
}

impl PlasmaParams {
    pub fn new(m: f64, r: f64, gamma: f64, u_plus: f64, theta_plus: f64, phi_b: f64) -> Result<Self> {
        let check = |ok: bool, name: &'static str, reason: &str| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidParams {
                    name,
                    reason: reason.to_string(),
                })
            }
        };
        check(m.is_finite() && m > 0.0, "m", "must be positive")?;
        check(r.is_finite() && r > 0.0, "R", "must be positive")?;
        check(gamma.is_finite() && gamma > 1.0, "gamma", "must exceed 1")?;
        check(u_plus.is_finite() && u_plus < 0.0, "u_plus", "must be negative")?;
        check(
            theta_plus.is_finite() && theta_plus > 0.0,
            "theta_plus",
            "must be positive",
        )?;
        check(phi_b.is_finite(), "phi_b", "must be finite")?;
        Ok(Self {
            m,
            r,
            gamma,
            u_plus,
            theta_plus,
            phi_b,
        })
    }

    /// m = R = θ₊ = 1, γ = 5/3, u₊ = −2 with the given wall potential.
    pub fn canonical(phi_b: f64) -> Self {
        Self::new(1.0, 1.0, 5.0 / 3.0, -2.0, 1.0, phi_b).expect("canonical parameters are valid")
    }

    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn u_plus(&self) -> f64 {
        self.u_plus
    }
    pub fn theta_plus(&self) -> f64 {
        self.theta_plus
    }
    pub fn phi_b(&self) -> f64 {
        self.phi_b
    }

    pub fn with_phi_b(&self, phi_b: f64) -> Result<Self> {
        Self::new(self.m, self.r, self.gamma, self.u_plus, self.theta_plus, phi_b)
    }

    /// Ion acoustic speed √(γRθ/m).
    pub fn sound_speed(&self, theta: f64) -> f64 {
        (self.gamma * self.r * theta / self.m).sqrt()
    }

    /// m u₊² − γRθ₊ − 1; positive iff the Bohm criterion holds.
    pub fn bohm_margin(&self) -> f64 {
        self.m * self.u_plus * self.u_plus - self.gamma * self.r * self.theta_plus - 1.0
    }

    /// m u₊² − γRθ₊; positive iff the far field is supersonic.
    pub fn sonic_margin(&self) -> f64 {
        self.m * self.u_plus * self.u_plus - self.gamma * self.r * self.theta_plus
    }

    /// inf over the wall of −u₊/√(1+|M'|²) − √(γRθ₊/m).
    pub fn supersonic_outflow_margin(&self, boundary: &BoundaryProfile) -> f64 {
        let c = self.sound_speed(self.theta_plus);
        if boundary.is_flat() {
            return -self.u_plus - c;
        }
        let slope = boundary.max_abs_slope();
        -self.u_plus / (1.0 + slope * slope).sqrt() - c
    }
}

pub fn bohm_margin(params: &PlasmaParams) -> f64 {
    params.bohm_margin()
}

pub fn supersonic_outflow_margin(params: &PlasmaParams, boundary: &BoundaryProfile) -> f64 {
    params.supersonic_outflow_margin(boundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Bump;

    #[test]
    fn bohm_margin_examples() {
        let p = PlasmaParams::canonical(0.0);
        assert!((p.bohm_margin() - 4.0 / 3.0).abs() < 1e-15);

        let edge = PlasmaParams::new(1.0, 1.0, 5.0 / 3.0, -(8.0f64 / 3.0).sqrt(), 1.0, 0.0).unwrap();
        assert!(edge.bohm_margin().abs() < 1e-14);

        let bad = PlasmaParams::new(1.0, 1.0, 3.0, -1.5, 1.0, 0.0).unwrap();
        assert!((bad.bohm_margin() + 1.75).abs() < 1e-15);
    }

    #[test]
    fn rejects_invalid() {
        assert!(PlasmaParams::new(0.0, 1.0, 1.5, -1.0, 1.0, 0.0).is_err());
        assert!(PlasmaParams::new(1.0, -1.0, 1.5, -1.0, 1.0, 0.0).is_err());
        assert!(PlasmaParams::new(1.0, 1.0, 1.0, -1.0, 1.0, 0.0).is_err());
        assert!(PlasmaParams::new(1.0, 1.0, 1.5, 0.5, 1.0, 0.0).is_err());
        assert!(PlasmaParams::new(1.0, 1.0, 1.5, -1.0, 0.0, 0.0).is_err());
        let err = PlasmaParams::new(1.0, 1.0, 1.5, 1.0, 1.0, 0.0).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn outflow_margin_flat_and_bumps() {
        let p = PlasmaParams::canonical(0.0);
        let flat = BoundaryProfile::flat();
        let expect = 2.0 - (5.0f64 / 3.0).sqrt();
        assert_eq!(p.supersonic_outflow_margin(&flat), expect);
        assert!((expect - 0.70901).abs() < 1e-5);

        let bump = BoundaryProfile::gaussian_sum(vec![Bump::new(1.0, 0.0, 1.0).unwrap()]);
        let closed = 2.0 / (1.0 + 2.0 * (-1.0f64).exp()).sqrt() - (5.0f64 / 3.0).sqrt();
        let got = p.supersonic_outflow_margin(&bump);
        assert!((got - closed).abs() < 1e-12, "{got} vs {closed}");
        assert!((got - 0.2270).abs() < 1e-4);

        let steep = BoundaryProfile::gaussian_sum(vec![Bump::new(10.0, 0.0, 1.0).unwrap()]);
        assert!(p.supersonic_outflow_margin(&steep) < 0.0);
    }

    // Independent re-implementation with a different association order.
    fn bohm_reference(m: f64, r: f64, gamma: f64, theta: f64, u: f64) -> f64 {
        (u * u) * m - (theta * r) * gamma - 1.0
    }

    #[test]
    fn bohm_margin_matches_reference_on_random_tuples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            // powers of two keep both evaluation orders exact
            let m = 2f64.powi(rng.gen_range(-3..4));
            let r = 2f64.powi(rng.gen_range(-3..4));
            let gamma = 1.0 + 2f64.powi(rng.gen_range(-4..2));
            let theta = 2f64.powi(rng.gen_range(-3..4));
            let u = -(2f64.powi(rng.gen_range(-3..3)));
            let p = PlasmaParams::new(m, r, gamma, u, theta, 0.0).unwrap();
            assert_eq!(p.bohm_margin(), bohm_reference(m, r, gamma, theta, u));
        }
    }
}
