//! Envelope (skyline) Cholesky for sparse SPD matrices.
//!
//! Fill-in is confined to the row profile, which for lexicographically
//! ordered grid operators is the bandwidth. No reordering is attempted.

use super::{check_dim, LinearOperator, SparseSym};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    /// first stored column of each row
    first: Vec<usize>,
    /// offset of row `i`'s first stored entry in `values`
    start: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &SparseSym) -> Result<Self> {
        let n = a.n();
        let mut first = vec![0; n];
        for (i, f) in first.iter_mut().enumerate() {
            let (idx, _) = a.row(i);
            *f = idx.first().copied().filter(|&j| j <= i).unwrap_or(i);
        }
        let mut start = Vec::with_capacity(n + 1);
        let mut total = 0;
        for (i, &f) in first.iter().enumerate() {
            start.push(total);
            total += i - f + 1;
        }
        start.push(total);
        let mut values = vec![0.0; total];
        for i in 0..n {
            let (idx, val) = a.row(i);
            for (&j, &v) in idx.iter().zip(val) {
                if j <= i {
                    values[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let mut s = values[start[i] + j - fi];
                let ri = start[i] + k0 - fi;
                let rj = start[j] + k0 - fj;
                let len = j - k0;
                s -= values[ri..ri + len]
                    .iter()
                    .zip(&values[rj..rj + len])
                    .map(|(x, y)| x * y)
                    .sum::<f64>();
                if j < i {
                    values[start[i] + j - fi] = s / values[start[j] + j - fj];
                } else {
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(Error::NotSpd { pivot: i });
                    }
                    values[start[i] + i - fi] = s.sqrt();
                }
            }
        }
        Ok(Self { n, first, start, values })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn row(&self, i: usize) -> &[f64] {
        &self.values[self.start[i]..self.start[i + 1]]
    }

    /// `L⁻¹ b`
    pub fn solve_l(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in 0..self.n {
            let row = self.row(i);
            let fi = self.first[i];
            let s: f64 = row[..row.len() - 1].iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) / row[row.len() - 1];
        }
        x
    }

    /// `L⁻ᵀ b`
    pub fn solve_lt(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        for i in (0..self.n).rev() {
            let row = self.row(i);
            let fi = self.first[i];
            x[i] /= row[row.len() - 1];
            let xi = x[i];
            for (xv, l) in x[fi..i].iter_mut().zip(row) {
                *xv -= l * xi;
            }
        }
        x
    }

    /// `(L Lᵀ)⁻¹ b`
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_lt(&self.solve_l(b))
    }

    pub fn try_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.n, b.len())?;
        Ok(self.solve(b))
    }

    /// `L v`
    pub fn mul_l(&self, v: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let fi = self.first[i];
                self.row(i).iter().zip(&v[fi..=i]).map(|(l, x)| l * x).sum()
            })
            .collect()
    }

    /// `Lᵀ v`
    pub fn mul_lt(&self, v: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let fi = self.first[i];
            for (yv, l) in y[fi..=i].iter_mut().zip(self.row(i)) {
                *yv += l * v[i];
            }
        }
        y
    }

    /// Stored entries, a proxy for factorization memory.
    pub fn profile_size(&self) -> usize {
        self.values.len()
    }
}

/// `A⁻¹` through a skyline factorization.
pub struct SkylineInverse(pub SkylineCholesky);

impl LinearOperator for SkylineInverse {
    fn dim(&self) -> usize {
        self.0.n()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.solve(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{cholesky, norm, sub, Precision};

    fn tridiag(n: usize) -> SparseSym {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + 0.1 * i as f64));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
        }
        SparseSym::from_triangle(n, &t).unwrap()
    }

    #[test]
    fn matches_dense_cholesky() {
        let a = tridiag(12);
        let sk = SkylineCholesky::factor(&a).unwrap();
        let dense = cholesky(&a.to_dense(), Precision::Binary64).unwrap();
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = sk.solve(&b);
        let y = dense.solve(&b);
        assert!(norm(&sub(&x, &y)) < 1e-13);
        let r = sub(&a.matvec(&x), &b);
        assert!(norm(&r) < 1e-12);
    }

    #[test]
    fn triangular_pieces_compose() {
        let a = tridiag(7);
        let sk = SkylineCholesky::factor(&a).unwrap();
        let v: Vec<f64> = (0..7).map(|i| 1.0 + i as f64).collect();
        let llt = sk.mul_l(&sk.mul_lt(&v));
        assert!(norm(&sub(&llt, &a.matvec(&v))) < 1e-12);
        assert!(norm(&sub(&sk.solve_l(&sk.mul_l(&v)), &v)) < 1e-12);
        assert!(norm(&sub(&sk.solve_lt(&sk.mul_lt(&v)), &v)) < 1e-12);
    }

    #[test]
    fn indefinite_fails() {
        let a = SparseSym::from_triangle(2, &[(0, 0, 1.0), (1, 1, 1.0), (1, 0, 3.0)]).unwrap();
        assert!(matches!(SkylineCholesky::factor(&a), Err(Error::NotSpd { pivot: 1 })));
    }
}
