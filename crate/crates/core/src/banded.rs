//! Banded matrices and an unpivoted LU factorization.
//!
//! Used for the frozen Newton Jacobians of the Poisson solves, which are
//! dominated by their diagonal so elimination without pivoting is safe in
//! practice; a zero pivot is reported rather than worked around.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i}, {j}) outside band");
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.slot(i, j)]
        }
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.data[s] += v;
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let row = &self.data[i * self.width..(i + 1) * self.width];
            let mut s = 0.0;
            for j in lo..=hi {
                s += row[j + self.kl - i] * x[j];
            }
            y[i] = s;
        }
    }

    /// In-place Doolittle elimination without pivoting.
    pub fn factor(mut self) -> Result<BandLu> {
        let (n, kl, ku, w) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let pivot = self.data[k * w + kl];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularPivot(k));
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let li = i * w + kl - i;
                let l = self.data[li + k] / pivot;
                self.data[li + k] = l;
                if l == 0.0 {
                    continue;
                }
                let lk = k * w + kl - k;
                for j in k + 1..=jmax {
                    self.data[li + j] -= l * self.data[lk + j];
                }
            }
        }
        Ok(BandLu { m: self })
    }
}

#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
}

impl BandLu {
    pub fn n(&self) -> usize {
        self.m.n
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, w) = (self.m.n, self.m.kl, self.m.ku, self.m.width);
        let d = &self.m.data;
        for i in 0..n {
            let base = i * w + kl - i;
            let mut s = b[i];
            for j in i.saturating_sub(kl)..i {
                s -= d[base + j] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let base = i * w + kl - i;
            let mut s = b[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                s -= d[base + j] * b[j];
            }
            b[i] = s / d[base + i];
        }
    }
}
