//! Computational grid on the graph-mapped domain.
//!
//! Nodes are `y₁ = i·h₁` for `i = 0..=n1` (wall row `i = 0`, truncation row
//! `i = n1`) and, in dimension 2, `x₂ = −L2 + j·h₂` for `j = 0..n2` with
//! periodic wrap. The physical point of node `(i, j)` is
//! `x₁ = y₁ + M(x₂)`; the map has unit Jacobian.
//!
//! Arrays are stored column-major in `i`: `idx(i, j) = j·(n1+1) + i`.

use crate::boundary::BoundaryProfile;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    l1: f64,
    n1: usize,
    l2: f64,
    n2: usize,
    h1: f64,
    h2: f64,
    boundary: BoundaryProfile,
    m: Vec<f64>,
    dm: Vec<f64>,
    d2m: Vec<f64>,
}

impl Grid {
    pub fn new_1d(l1: f64, n1: usize) -> Result<Self> {
        Self::new(1, l1, n1, 1.0, 1, BoundaryProfile::flat())
    }

    pub fn new_2d(l1: f64, n1: usize, l2: f64, n2: usize, boundary: BoundaryProfile) -> Result<Self> {
        Self::new(2, l1, n1, l2, n2, boundary)
    }

    pub fn new(
        dim: usize,
        l1: f64,
        n1: usize,
        l2: f64,
        n2: usize,
        boundary: BoundaryProfile,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!(
                "dimension {dim} unsupported (1 or 2)"
            )));
        }
        if !(l1.is_finite() && l1 > 0.0) {
            return Err(Error::InvalidGrid(format!("L1 must be positive, got {l1}")));
        }
        if n1 < 8 {
            return Err(Error::InvalidGrid(format!("n1 must be at least 8, got {n1}")));
        }
        let (l2, n2) = if dim == 2 {
            if !(l2.is_finite() && l2 > 0.0) {
                return Err(Error::InvalidGrid(format!("L2 must be positive, got {l2}")));
            }
            if n2 < 8 {
                return Err(Error::InvalidGrid(format!("n2 must be at least 8, got {n2}")));
            }
            (l2, n2)
        } else {
            if !boundary.is_flat() {
                return Err(Error::InvalidGrid(
                    "a curved wall needs a transverse direction (dim = 2)".into(),
                ));
            }
            (0.0, 1)
        };
        let h1 = l1 / n1 as f64;
        let h2 = if dim == 2 { 2.0 * l2 / n2 as f64 } else { 1.0 };
        let x2: Vec<f64> = (0..n2).map(|j| -l2 + j as f64 * h2).collect();
        let m = x2.iter().map(|&s| boundary.m(s)).collect();
        let dm = x2.iter().map(|&s| boundary.dm(s)).collect();
        let d2m = x2.iter().map(|&s| boundary.d2m(s)).collect();
        Ok(Self {
            dim,
            l1,
            n1,
            l2,
            n2,
            h1,
            h2,
            boundary,
            m,
            dm,
            d2m,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn l1(&self) -> f64 {
        self.l1
    }
    pub fn l2(&self) -> f64 {
        self.l2
    }
    pub fn n1(&self) -> usize {
        self.n1
    }
    /// Transverse node count (1 in dimension 1).
    pub fn n2(&self) -> usize {
        self.n2
    }
    pub fn h1(&self) -> f64 {
        self.h1
    }
    pub fn h2(&self) -> f64 {
        self.h2
    }
    pub fn boundary(&self) -> &BoundaryProfile {
        &self.boundary
    }

    /// Nodes per column, `n1 + 1`.
    #[inline]
    pub fn ny1(&self) -> usize {
        self.n1 + 1
    }

    #[inline]
    pub fn npoints(&self) -> usize {
        self.ny1() * self.n2
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ny1() + i
    }

    #[inline]
    pub fn y1(&self, i: usize) -> f64 {
        i as f64 * self.h1
    }

    #[inline]
    pub fn x2(&self, j: usize) -> f64 {
        if self.dim == 1 {
            0.0
        } else {
            -self.l2 + j as f64 * self.h2
        }
    }

    #[inline]
    pub fn x1(&self, i: usize, j: usize) -> f64 {
        self.y1(i) + self.m[j]
    }

    /// M, M', M'' at column `j`.
    #[inline]
    pub fn wall(&self, j: usize) -> (f64, f64, f64) {
        (self.m[j], self.dm[j], self.d2m[j])
    }

    #[inline]
    pub fn jp(&self, j: usize) -> usize {
        if j + 1 == self.n2 {
            0
        } else {
            j + 1
        }
    }

    #[inline]
    pub fn jm(&self, j: usize) -> usize {
        if j == 0 {
            self.n2 - 1
        } else {
            j - 1
        }
    }

    pub fn zeros(&self) -> Vec<f64> {
        vec![0.0; self.npoints()]
    }

    /// `f(y₁, x₂)` sampled on the nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let mut out = self.zeros();
        for j in 0..self.n2 {
            for i in 0..self.ny1() {
                out[self.idx(i, j)] = f(self.y1(i), self.x2(j));
            }
        }
        out
    }

    /// ∂/∂y₁: centered inside, second-order one-sided on the end rows.
    pub fn d_y1(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n1;
        let inv2h = 0.5 / self.h1;
        let mut out = self.zeros();
        for j in 0..self.n2 {
            let c = &f[self.idx(0, j)..=self.idx(n, j)];
            let o = &mut out[self.idx(0, j)..=self.idx(n, j)];
            o[0] = (-3.0 * c[0] + 4.0 * c[1] - c[2]) * inv2h;
            for i in 1..n {
                o[i] = (c[i + 1] - c[i - 1]) * inv2h;
            }
            o[n] = (3.0 * c[n] - 4.0 * c[n - 1] + c[n - 2]) * inv2h;
        }
        out
    }

    /// ∂/∂y₂, periodic centered differences. Zero in dimension 1.
    pub fn d_y2(&self, f: &[f64]) -> Vec<f64> {
        let mut out = self.zeros();
        if self.dim == 1 {
            return out;
        }
        let inv2h = 0.5 / self.h2;
        for j in 0..self.n2 {
            let (jp, jm) = (self.jp(j), self.jm(j));
            for i in 0..self.ny1() {
                out[self.idx(i, j)] = (f[self.idx(i, jp)] - f[self.idx(i, jm)]) * inv2h;
            }
        }
        out
    }

    /// Physical partial derivative ∂/∂x_k (k = 0 for x₁, 1 for x₂), using
    /// ∂x₁ = ∂y₁ and ∂x₂ = ∂y₂ − M'(x₂)∂y₁.
    pub fn d_x(&self, k: usize, f: &[f64]) -> Vec<f64> {
        match k {
            0 => self.d_y1(f),
            _ => {
                let mut out = self.d_y2(f);
                let fy1 = self.d_y1(f);
                for j in 0..self.n2 {
                    let dm = self.dm[j];
                    for i in 0..self.ny1() {
                        let p = self.idx(i, j);
                        out[p] -= dm * fy1[p];
                    }
                }
                out
            }
        }
    }

    /// Physical gradient, `dim` component arrays.
    pub fn grad(&self, f: &[f64]) -> Vec<Vec<f64>> {
        (0..self.dim).map(|k| self.d_x(k, f)).collect()
    }

    /// Quadrature weight of node `(i, j)` (trapezoid in y₁, uniform in the
    /// periodic x₂).
    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let w1 = if i == 0 || i == self.n1 {
            0.5 * self.h1
        } else {
            self.h1
        };
        if self.dim == 2 {
            w1 * self.h2
        } else {
            w1
        }
    }

    /// ∫ e^{β y₁} g dx with a fixed summation order.
    pub fn integrate_weighted(&self, g: &[f64], beta: f64) -> f64 {
        let weights: Vec<f64> = (0..self.ny1())
            .map(|i| self.weight(i) * (beta * self.y1(i)).exp())
            .collect();
        let mut total = 0.0;
        for j in 0..self.n2 {
            let mut col = 0.0;
            for (i, w) in weights.iter().enumerate() {
                col += w * g[self.idx(i, j)];
            }
            total += col;
        }
        total
    }

    /// Values on row `i` across all columns.
    pub fn row(&self, f: &[f64], i: usize) -> Vec<f64> {
        (0..self.n2).map(|j| f[self.idx(i, j)]).collect()
    }

    /// Values of column `j`.
    pub fn column<'a>(&self, f: &'a [f64], j: usize) -> &'a [f64] {
        &f[self.idx(0, j)..=self.idx(self.n1, j)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::Bump;

    #[test]
    fn rejects_small_or_bad_grids() {
        assert!(Grid::new_1d(10.0, 4).is_err());
        assert!(Grid::new_1d(-1.0, 16).is_err());
        assert!(Grid::new(3, 1.0, 16, 1.0, 16, BoundaryProfile::flat()).is_err());
        assert!(Grid::new_2d(1.0, 16, 1.0, 4, BoundaryProfile::flat()).is_err());
        let bump = BoundaryProfile::gaussian_sum(vec![Bump::new(0.5, 0.0, 1.0).unwrap()]);
        assert!(Grid::new(1, 1.0, 16, 1.0, 16, bump).is_err());
    }

    #[test]
    fn spacing_and_layout() {
        let g = Grid::new_2d(4.0, 16, 2.0, 8, BoundaryProfile::flat()).unwrap();
        assert_eq!(g.h1(), 0.25);
        assert_eq!(g.h2(), 0.5);
        assert_eq!(g.npoints(), 17 * 8);
        assert_eq!(g.idx(3, 2), 2 * 17 + 3);
        assert_eq!(g.jp(7), 0);
        assert_eq!(g.jm(0), 7);
    }

    #[test]
    fn derivatives_are_second_order_on_mapped_grid() {
        let bump = BoundaryProfile::gaussian_sum(vec![Bump::new(0.4, 0.0, 1.0).unwrap()]);
        let mut errs = Vec::new();
        for &n in &[32usize, 64] {
            let g = Grid::new_2d(3.0, n, 4.0, n, bump.clone()).unwrap();
            // f(x1, x2) = sin(x1) cos(pi x2 / 4) in physical coordinates
            let k = std::f64::consts::PI / 4.0;
            let f: Vec<f64> = g.sample(|y1, x2| (y1 + bump.m(x2)).sin() * (k * x2).cos());
            let fx2 = g.d_x(1, &f);
            let mut err: f64 = 0.0;
            for j in 0..g.n2() {
                for i in 0..g.ny1() {
                    let (x1, x2) = (g.x1(i, j), g.x2(j));
                    let exact = -x1.sin() * k * (k * x2).sin();
                    err = err.max((fx2[g.idx(i, j)] - exact).abs());
                }
            }
            errs.push(err);
        }
        let order = (errs[0] / errs[1]).log2();
        assert!(order > 1.8, "order {order}, errors {errs:?}");
    }
}
