//! Coefficient matrices of the perturbation system in symmetric form,
//!
//! ```text
//! A⁰[V]Ψ_t + Σⱼ Aʲ[V]∂ⱼΨ = (0, ∇σ, 0) + A⁰B̃Ψ + (0, h, 0),
//! ```
//!
//! restricted to the run dimension, plus the boundary flux matrices used
//! by the weighted energy. Unknowns are ordered `ψ, η₁, [η₂,] ζ`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::background::{BackgroundPoint, BackgroundProfile};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::params::PlasmaParams;
use crate::state::FieldState;

/// Full state `(v, u, θ)` at a point; `u[1]` is ignored in dimension 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub v: f64,
    pub u: [f64; 2],
    pub theta: f64,
}

impl PointState {
    /// The far-field state `(0, u₊, 0, θ₊)`.
    pub fn far_field(params: &PlasmaParams) -> Self {
        Self {
            v: 0.0,
            u: [params.u_plus(), 0.0],
            theta: params.theta_plus(),
        }
    }

    /// Background plus perturbation at node `p` (background row `i`).
    pub fn at(bg: &BackgroundPoint, state: &FieldState, p: usize) -> Self {
        let dim = state.dim();
        Self {
            v: bg.v + state.psi()[p],
            u: [
                bg.u + state.eta(0)[p],
                if dim == 2 { state.eta(1)[p] } else { 0.0 },
            ],
            theta: bg.theta + state.zeta()[p],
        }
    }

    fn checked(&self) -> Result<()> {
        if self.theta > 0.0 {
            Ok(())
        } else {
            Err(Error::TemperatureNonpositive {
                index: 0,
                value: self.theta,
            })
        }
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 1 || dim == 2 {
        Ok(())
    } else {
        Err(Error::InvalidGrid(format!("dimension {dim} unsupported")))
    }
}

/// Aʲ[V] for `j = 0..=dim`, of size `dim + 2`.
pub fn assemble_a(j: usize, state: &PointState, params: &PlasmaParams, dim: usize) -> Result<DMatrix<f64>> {
    check_dim(dim)?;
    state.checked()?;
    if j > dim {
        return Err(Error::InvalidParams {
            name: "j",
            reason: format!("direction {j} exceeds dimension {dim}"),
        });
    }
    let n = dim + 2;
    let last = n - 1;
    let (m, r, gm1, th) = (params.m(), params.r(), params.gamma() - 1.0, state.theta);
    let mut a = DMatrix::zeros(n, n);
    if j == 0 {
        a[(0, 0)] = r * th;
        for k in 0..dim {
            a[(1 + k, 1 + k)] = m;
        }
        a[(last, last)] = r / (gm1 * th);
        return Ok(a);
    }
    let uj = state.u[j - 1];
    a[(0, 0)] = r * th * uj;
    for k in 0..dim {
        a[(1 + k, 1 + k)] = m * uj;
    }
    a[(last, last)] = r * uj / (gm1 * th);
    let s = j; // η_j slot
    a[(0, s)] = r * th;
    a[(s, 0)] = r * th;
    a[(s, last)] = r;
    a[(last, s)] = r;
    Ok(a)
}

/// `(A⁰)⁻¹(ξ·A) d` without forming matrices; `out` has `dim + 2` entries.
#[inline]
pub fn flux_apply(params: &PlasmaParams, dim: usize, state: &PointState, xi: [f64; 2], d: &[f64], out: &mut [f64]) {
    let last = dim + 1;
    let mut xu = 0.0;
    let mut div = 0.0;
    for k in 0..dim {
        xu += xi[k] * state.u[k];
        div += xi[k] * d[1 + k];
    }
    let coupling = (params.r() * state.theta * d[0] + params.r() * d[last]) / params.m();
    out[0] = xu * d[0] + div;
    for k in 0..dim {
        out[1 + k] = xu * d[1 + k] + xi[k] * coupling;
    }
    out[last] = xu * d[last] + (params.gamma() - 1.0) * state.theta * div;
}

/// Eigenvalues of `(A⁰)⁻¹(ξ·A)`: `ξ·u − c|ξ|`, `ξ·u` (multiplicity dim),
/// `ξ·u + c|ξ|`.
pub fn characteristic_speeds(params: &PlasmaParams, dim: usize, state: &PointState, xi: [f64; 2]) -> [f64; 3] {
    let mut xu = 0.0;
    let mut norm = 0.0;
    for k in 0..dim {
        xu += xi[k] * state.u[k];
        norm += xi[k] * xi[k];
    }
    let cs = params.sound_speed(state.theta) * norm.sqrt();
    [xu - cs, xu, xu + cs]
}

/// B̃ at a background point with wall slope `dm` (ignored in dimension 1).
pub fn b_tilde(bg: &BackgroundPoint, dm: f64, params: &PlasmaParams, dim: usize) -> DMatrix<f64> {
    let n = dim + 2;
    let last = n - 1;
    let rm = params.r() / params.m();
    let mut b = DMatrix::zeros(n, n);
    b[(0, 1)] = -bg.dv;
    b[(1, 1)] = -bg.du;
    b[(1, last)] = -rm * bg.dv;
    b[(last, 1)] = -bg.dtheta;
    b[(last, last)] = -(params.gamma() - 1.0) * bg.du;
    if dim == 2 {
        b[(0, 2)] = bg.dv * dm;
        b[(1, 2)] = bg.du * dm;
        b[(2, last)] = rm * bg.dv * dm;
        b[(last, 2)] = bg.dtheta * dm;
    }
    b
}

/// `B = A⁰[V]B̃` and the momentum source `h` (length `dim`).
pub fn assemble_b_h(
    state: &PointState,
    bg: &BackgroundPoint,
    dm: f64,
    params: &PlasmaParams,
    dim: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let a0 = assemble_a(0, state, params, dim)?;
    let b = &a0 * b_tilde(bg, dm, params, dim);
    let mut h = DVector::zeros(dim);
    if dim == 2 {
        h[1] = -params.m() * bg.u * bg.du * dm;
    }
    Ok((b, h))
}

/// `B̃Ψ + (0, h/m, 0)` for one point, written into `out`.
#[inline]
pub fn source_apply(bg: &BackgroundPoint, dm: f64, params: &PlasmaParams, dim: usize, psi: &[f64], out: &mut [f64]) {
    let last = dim + 1;
    let rm = params.r() / params.m();
    let (eta1, zeta) = (psi[1], psi[last]);
    let tang = if dim == 2 { eta1 - dm * psi[2] } else { eta1 };
    out[0] = -bg.dv * tang;
    out[1] = -bg.du * tang - rm * bg.dv * zeta;
    if dim == 2 {
        out[2] = rm * bg.dv * dm * zeta - bg.u * bg.du * dm;
    }
    out[last] = -bg.dtheta * tang - (params.gamma() - 1.0) * bg.du * zeta;
}

/// The scalar Poisson sources `(g₀, g₁, g₂)`.
pub fn g_terms(psi: f64, sigma: f64, bg: &BackgroundPoint, dm: f64, d2m: f64) -> (f64, f64, f64) {
    let ev = bg.v.exp();
    let g0 = bg.v.exp_m1() * psi + ev * (psi.exp_m1() - psi);
    let ep = (-bg.phi).exp();
    let g1 = (-bg.phi).exp_m1() * sigma - ep * ((-sigma).exp_m1() + sigma);
    let g2 = -bg.d2phi * dm * dm + bg.dphi * d2m;
    (g0, g1, g2)
}

/// Boundary flux matrix F[V, n] on the slots `(∇·η, ∇ψ, ∇ζ)`.
pub fn assemble_f(state: &PointState, normal: [f64; 2], params: &PlasmaParams, dim: usize) -> Result<DMatrix<f64>> {
    check_dim(dim)?;
    state.checked()?;
    let (m, r, th) = (params.m(), params.r(), state.theta);
    let gm1 = params.gamma() - 1.0;
    let nu: f64 = (0..dim).map(|k| normal[k] * state.u[k]).sum();
    let n = 1 + 2 * dim;
    let mut f = DMatrix::zeros(n, n);
    f[(0, 0)] = m * nu;
    for k in 0..dim {
        let (gp, gz) = (1 + k, 1 + dim + k);
        f[(gp, gp)] = r * th * nu;
        f[(gz, gz)] = r * nu / (gm1 * th);
        f[(0, gp)] = normal[k] * r * th;
        f[(gp, 0)] = normal[k] * r * th;
        f[(0, gz)] = normal[k] * r;
        f[(gz, 0)] = normal[k] * r;
    }
    Ok(f)
}

/// F¹[V] on the same slots.
pub fn assemble_f1(state: &PointState, params: &PlasmaParams, dim: usize) -> Result<DMatrix<f64>> {
    check_dim(dim)?;
    state.checked()?;
    let (m, r, th, u1) = (params.m(), params.r(), state.theta, state.u[0]);
    let gm1 = params.gamma() - 1.0;
    let n = 1 + 2 * dim;
    let mut f = DMatrix::zeros(n, n);
    f[(0, 0)] = m * u1;
    for k in 0..dim {
        f[(1 + k, 1 + k)] = r * th * u1;
        f[(1 + dim + k, 1 + dim + k)] = r * u1 / (gm1 * th);
    }
    f[(0, 1)] = r * th;
    f[(1, 0)] = r * th;
    f[(0, 1 + dim)] = r;
    f[(1 + dim, 0)] = r;
    Ok(f)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue; magnitudes below 10⁻¹²·‖A‖ are reported as 0.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    let lo = symmetric_eigenvalues(a)[0];
    if lo.abs() <= 1e-12 * a.norm() {
        0.0
    } else {
        lo
    }
}

/// Outward unit normal `(−1, M')/√(1+M'²)`.
pub fn wall_normal(dm: f64) -> [f64; 2] {
    let s = (1.0 + dm * dm).sqrt();
    [-1.0 / s, dm / s]
}

/// Coefficient matrices at a node, assembled on demand.
#[derive(Debug, Clone)]
pub struct PointCoeffs {
    pub a: Vec<DMatrix<f64>>,
    pub b: DMatrix<f64>,
    pub h: DVector<f64>,
    pub g2: f64,
}

/// Read-only view tying parameters, background and grid together.
#[derive(Clone, Copy)]
pub struct CoeffBundle<'a> {
    pub params: &'a PlasmaParams,
    pub background: &'a BackgroundProfile,
    pub grid: &'a Grid,
}

impl<'a> CoeffBundle<'a> {
    pub fn new(params: &'a PlasmaParams, background: &'a BackgroundProfile, grid: &'a Grid) -> Self {
        Self {
            params,
            background,
            grid,
        }
    }

    pub fn point(&self, i: usize, j: usize, state: &FieldState) -> Result<PointCoeffs> {
        let dim = self.grid.dim();
        let bg = self.background.at(i);
        let ps = PointState::at(bg, state, self.grid.idx(i, j));
        let (_, dm, d2m) = self.grid.wall(j);
        let a = (0..=dim)
            .map(|k| assemble_a(k, &ps, self.params, dim))
            .collect::<Result<Vec<_>>>()?;
        let (b, h) = assemble_b_h(&ps, bg, dm, self.params, dim)?;
        Ok(PointCoeffs {
            a,
            b,
            h,
            g2: g_terms(0.0, 0.0, bg, dm, d2m).2,
        })
    }
}

/// Positivity margins at one state: min-eig of A⁰, of F[V, n], of −F¹[V],
/// and the smallest normal characteristic speed.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct MatrixMargins {
    pub a0: f64,
    pub f: f64,
    pub neg_f1: f64,
    pub normal_speed: f64,
}

pub fn matrix_margins(state: &PointState, normal: [f64; 2], params: &PlasmaParams, dim: usize) -> Result<MatrixMargins> {
    let a0 = assemble_a(0, state, params, dim)?;
    let f = assemble_f(state, normal, params, dim)?;
    let f1 = assemble_f1(state, params, dim)?;
    Ok(MatrixMargins {
        a0: min_eigenvalue(&a0),
        f: min_eigenvalue(&f),
        neg_f1: min_eigenvalue(&(-f1)),
        normal_speed: characteristic_speeds(params, dim, state, normal)[0],
    })
}

/// min over wall nodes of min-eig F and of the normal characteristic speeds
/// of `Σ nⱼ(A⁰)⁻¹Aʲ`.
pub fn wall_margins(
    state: &FieldState,
    background: &BackgroundProfile,
    params: &PlasmaParams,
    grid: &Grid,
) -> Result<(f64, f64)> {
    let dim = grid.dim();
    let (mut fmin, mut smin) = (f64::INFINITY, f64::INFINITY);
    for j in 0..grid.n2() {
        let p = grid.idx(0, j);
        let ps = PointState::at(background.at(0), state, p);
        if !(ps.theta > 0.0) {
            return Err(Error::TemperatureNonpositive { index: p, value: ps.theta });
        }
        let n = wall_normal(grid.wall(j).1);
        fmin = fmin.min(min_eigenvalue(&assemble_f(&ps, n, params, dim)?));
        smin = smin.min(characteristic_speeds(params, dim, &ps, n)[0]);
    }
    Ok((fmin, smin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn canonical() -> PlasmaParams {
        PlasmaParams::canonical(0.0)
    }

    fn vplus() -> PointState {
        PointState::far_field(&canonical())
    }

    #[test]
    fn a0_and_a1_examples() {
        let p = canonical();
        let a0 = assemble_a(0, &vplus(), &p, 1).unwrap();
        let expect0 = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.5]);
        assert!((a0 - expect0).abs().max() < 1e-15);
        let a1 = assemble_a(1, &vplus(), &p, 1).unwrap();
        let expect1 = DMatrix::from_row_slice(3, 3, &[-2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -3.0]);
        assert!((a1 - expect1).abs().max() < 1e-14);
    }

    #[test]
    fn characteristic_speeds_from_generalized_eigenproblem() {
        let p = canonical();
        let a0 = assemble_a(0, &vplus(), &p, 1).unwrap();
        let a1 = assemble_a(1, &vplus(), &p, 1).unwrap();
        // similarity transform to a symmetric matrix: A0^{-1/2} A1 A0^{-1/2}
        let s = a0.map(|x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 });
        let sym = &s * a1 * &s;
        let ev = symmetric_eigenvalues(&sym);
        let c = (5.0f64 / 3.0).sqrt();
        let expect = [-2.0 - c, -2.0, -2.0 + c];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
        let sp = characteristic_speeds(&p, 1, &vplus(), [1.0, 0.0]);
        for (a, b) in sp.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((expect[0] + 3.291).abs() < 1e-3 && (expect[2] + 0.709).abs() < 1e-3);
    }

    #[test]
    fn flux_apply_matches_matrices() {
        let p = PlasmaParams::new(1.3, 0.8, 1.4, -2.5, 0.9, 0.0).unwrap();
        let st = PointState {
            v: 0.1,
            u: [-2.3, 0.2],
            theta: 1.1,
        };
        let a0 = assemble_a(0, &st, &p, 2).unwrap();
        let xi = [0.7, -0.4];
        let k = a0.clone().try_inverse().unwrap()
            * (assemble_a(1, &st, &p, 2).unwrap() * xi[0] + assemble_a(2, &st, &p, 2).unwrap() * xi[1]);
        let d = [0.3, -1.2, 0.5, 2.0];
        let mut out = [0.0; 4];
        flux_apply(&p, 2, &st, xi, &d, &mut out);
        let want = &k * DVector::from_row_slice(&d);
        for r in 0..4 {
            assert!((out[r] - want[r]).abs() < 1e-13);
        }
    }

    #[test]
    fn symmetry_and_temperature_check() {
        let p = canonical();
        let st = PointState {
            v: 0.2,
            u: [-1.7, 0.4],
            theta: 0.8,
        };
        for j in 0..=2 {
            let a = assemble_a(j, &st, &p, 2).unwrap();
            assert_eq!(a, a.transpose());
        }
        let f = assemble_f(&st, wall_normal(0.3), &p, 2).unwrap();
        assert_eq!(f, f.transpose());
        let f1 = assemble_f1(&st, &p, 2).unwrap();
        assert_eq!(f1, f1.transpose());
        let cold = PointState { theta: 0.0, ..st };
        assert!(matches!(
            assemble_a(0, &cold, &p, 1),
            Err(Error::TemperatureNonpositive { .. })
        ));
    }

    #[test]
    fn b_and_h_structure() {
        let p = PlasmaParams::canonical(-0.05);
        let bg = BackgroundPoint {
            v: 0.02,
            u: -1.95,
            theta: 1.01,
            phi: -0.04,
            dv: -0.01,
            du: 0.02,
            dtheta: -0.005,
            dphi: 0.03,
            d2phi: -0.02,
        };
        let st = PointState {
            v: bg.v,
            u: [bg.u, 0.0],
            theta: bg.theta,
        };
        let (b, h) = assemble_b_h(&st, &bg, 0.0, &p, 2).unwrap();
        assert_eq!(h[1], 0.0);
        // flat wall: the η₂ column of B̃ vanishes
        let bt = b_tilde(&bg, 0.0, &p, 2);
        assert!(bt.column(2).iter().all(|&x| x == 0.0));
        let a0 = assemble_a(0, &st, &p, 2).unwrap();
        assert!((&b - &a0 * &bt).abs().max() < 1e-15);

        let dm = 0.3;
        let (_, h) = assemble_b_h(&st, &bg, dm, &p, 2).unwrap();
        assert_eq!(h[1], -p.m() * bg.u * bg.du * dm);

        let flat_bg = BackgroundPoint {
            u: -2.0,
            theta: 1.0,
            ..Default::default()
        };
        assert!(b_tilde(&flat_bg, 0.4, &p, 2).iter().all(|&x| x == 0.0));

        // source_apply reproduces B̃Ψ + (0, h/m, 0)
        let psi = [0.1, -0.2, 0.05, 0.3];
        let mut out = [0.0; 4];
        source_apply(&bg, dm, &p, 2, &psi, &mut out);
        let want = b_tilde(&bg, dm, &p, 2) * DVector::from_row_slice(&psi);
        for r in 0..4 {
            let extra = if r == 2 { -bg.u * bg.du * dm } else { 0.0 };
            assert!((out[r] - want[r] - extra).abs() < 1e-15);
        }
    }

    #[test]
    fn g_term_examples() {
        let bg = BackgroundPoint::default();
        assert_eq!(g_terms(0.0, 0.0, &bg, 0.0, 0.0), (0.0, 0.0, 0.0));
        let (g0, _, _) = g_terms(0.1, 0.0, &bg, 0.0, 0.0);
        assert!((g0 - (0.1f64.exp() - 1.1)).abs() < 1e-16);
        assert!((g0 - 0.0051709).abs() < 1e-7);
        let bg = BackgroundPoint {
            phi: -0.03,
            dphi: 0.02,
            d2phi: -0.015,
            ..Default::default()
        };
        let (_, g1, g2) = g_terms(0.0, 0.2, &bg, 0.5, -0.1);
        let ep = 0.03f64.exp();
        assert!((g1 - ((ep - 1.0) * 0.2 - ep * ((-0.2f64).exp() - 1.0 + 0.2))).abs() < 1e-15);
        assert!((g2 - (0.015 * 0.25 - 0.002)).abs() < 1e-16);
    }

    proptest! {
        #[test]
        fn g0_quadratic_smallness(v in -0.5f64..0.5, psi in -1.0f64..1.0) {
            let bg = BackgroundPoint { v, ..Default::default() };
            let g0 = g_terms(psi, 0.0, &bg, 0.0, 0.0).0;
            let bound = v.abs().exp_m1() * psi.abs() + v.abs().exp() * psi.abs().exp() * psi * psi / 2.0;
            prop_assert!(g0.abs() <= bound * (1.0 + 1e-12) + 1e-300);
        }
    }

    #[test]
    fn flux_matrix_examples() {
        let p = canonical();
        let f = assemble_f(&vplus(), [-1.0, 0.0], &p, 1).unwrap();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, 0.0, -1.0, 0.0, 3.0]);
        assert!((&f - expect).abs().max() < 1e-14);
        assert!(min_eigenvalue(&f) > 0.0);

        let f1 = assemble_f1(&vplus(), &p, 1).unwrap();
        assert!(min_eigenvalue(&(-f1)) > 0.0);
    }

    // det(−F¹[V₊]) in dimension 1, expanded by hand
    fn det_neg_f1(p: &PlasmaParams) -> f64 {
        let a = -p.u_plus();
        let (m, r, th, g) = (p.m(), p.r(), p.theta_plus(), p.gamma());
        r * r * a / (g - 1.0) * (m * a * a - g * r * th)
    }

    #[test]
    fn neg_f1_sign_follows_sonic_margin() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = PlasmaParams::new(
                rng.gen_range(0.5..2.0),
                rng.gen_range(0.5..2.0),
                rng.gen_range(1.1..3.0),
                -rng.gen_range(0.5..4.0),
                rng.gen_range(0.5..2.0),
                0.0,
            )
            .unwrap();
            let f1 = assemble_f1(&PointState::far_field(&p), &p, 1).unwrap();
            let det = (-f1.clone()).determinant();
            assert!((det - det_neg_f1(&p)).abs() < 1e-9 * (1.0 + det.abs()));
            let lo = min_eigenvalue(&(-f1));
            if p.bohm_margin() > 0.0 {
                assert!(lo > 0.0);
            }
            if p.sonic_margin().abs() > 1e-6 {
                assert_eq!(lo > 0.0, p.sonic_margin() > 0.0);
            }
        }
        // u₊ = −1.3 violates the Bohm criterion but is still supersonic
        let weak = PlasmaParams::new(1.0, 1.0, 5.0 / 3.0, -1.3, 1.0, 0.0).unwrap();
        assert!(weak.bohm_margin() < 0.0 && weak.sonic_margin() > 0.0);
        let f1 = assemble_f1(&PointState::far_field(&weak), &weak, 1).unwrap();
        assert!(min_eigenvalue(&(-f1)) > 0.0);
    }
}
