//! Banded LU factorization with partial pivoting.
//!
//! Row `r` stores the columns `r - kl ..= r + ku + kl`; the extra `kl`
//! upper diagonals hold the fill produced by row interchanges.

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        BandMatrix {
            n,
            kl,
            ku,
            width,
            data: vec![0.0; n * width],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    fn offset(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.ku + self.kl);
        r * self.width + (c + self.kl - r)
    }

    fn in_band(&self, r: usize, c: usize) -> bool {
        r < self.n && c < self.n && c + self.kl >= r && c <= r + self.ku
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        if self.in_band(r, c) {
            self.data[self.offset(r, c)]
        } else {
            0.0
        }
    }

    /// Panics when `(r, c)` lies outside the declared band.
    pub fn set(&mut self, r: usize, c: usize, value: f64) {
        assert!(self.in_band(r, c), "({r}, {c}) outside band");
        let o = self.offset(r, c);
        self.data[o] = value;
    }

    pub fn add(&mut self, r: usize, c: usize, value: f64) {
        assert!(self.in_band(r, c), "({r}, {c}) outside band");
        let o = self.offset(r, c);
        self.data[o] += value;
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let lo = r.saturating_sub(self.kl);
            let hi = (r + self.ku).min(self.n - 1);
            *yr = (lo..=hi).map(|c| self.data[self.offset(r, c)] * x[c]).sum();
        }
    }

    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.ku + self.kl;
        let mut pivots = vec![0usize; n];
        let mut lower = vec![0.0; n * kl.max(1)];
        for col in 0..n {
            let last_row = (col + kl).min(n - 1);
            let mut p = col;
            let mut best = self.data[self.offset(col, col)].abs();
            for r in col + 1..=last_row {
                let v = self.data[self.offset(r, col)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular { column: col });
            }
            pivots[col] = p;
            let last_col = (col + reach).min(n - 1);
            if p != col {
                for c in col..=last_col {
                    let a = self.offset(col, c);
                    let b = self.offset(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.offset(col, col)];
            for r in col + 1..=last_row {
                let o = self.offset(r, col);
                let factor = self.data[o] / pivot;
                self.data[o] = 0.0;
                lower[col * kl + (r - col - 1)] = factor;
                if factor != 0.0 {
                    for c in col + 1..=last_col {
                        let src = self.data[self.offset(col, c)];
                        let dst = self.offset(r, c);
                        self.data[dst] -= factor * src;
                    }
                }
            }
        }
        Ok(BandLu {
            upper: self,
            lower,
            pivots,
        })
    }
}

/// Factorization `P A = L U` of a [`BandMatrix`].
#[derive(Clone, Debug)]
pub struct BandLu {
    upper: BandMatrix,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn size(&self) -> usize {
        self.upper.n
    }

    /// Solves in place; `rhs` holds the solution on return.
    pub fn solve(&self, rhs: &mut [f64]) {
        let u = &self.upper;
        let n = u.n;
        let kl = u.kl;
        assert_eq!(rhs.len(), n);
        for col in 0..n {
            let p = self.pivots[col];
            if p != col {
                rhs.swap(col, p);
            }
            let b = rhs[col];
            if b != 0.0 {
                let last_row = (col + kl).min(n - 1);
                for r in col + 1..=last_row {
                    rhs[r] -= self.lower[col * kl + (r - col - 1)] * b;
                }
            }
        }
        let reach = u.ku + u.kl;
        for r in (0..n).rev() {
            let last_col = (r + reach).min(n - 1);
            let mut acc = rhs[r];
            for c in r + 1..=last_col {
                acc -= u.data[u.offset(r, c)] * rhs[c];
            }
            rhs[r] = acc / u.data[u.offset(r, r)];
        }
    }
}
