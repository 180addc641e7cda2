use super::{check_dim, LinearOperator};
use crate::Result;

/// Dense symmetric matrix, stored full and row-major.
///
/// The two triangles are kept bitwise identical.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSym {
    n: usize,
    data: Vec<f64>,
}

impl DenseSym {
    /// Builds from a row-major buffer, averaging the two triangles.
    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(n * n, data.len())?;
        if n == 0 {
            return Err(crate::Error::InvalidArgument("matrix dimension must be >= 1".into()));
        }
        let mut m = Self { n, data };
        for i in 0..n {
            for j in (i + 1)..n {
                let v = 0.5 * (m.data[i * n + j] + m.data[j * n + i]);
                m.data[i * n + j] = v;
                m.data[j * n + i] = v;
            }
        }
        Ok(m)
    }

    /// Builds from the upper triangle: `f(i, j)` is only called for `i <= j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(n >= 1, "matrix dimension must be >= 1");
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                data[i * n + j] = v;
                data[j * n + i] = v;
            }
        }
        Self { n, data }
    }

    /// Same as [`from_fn`](Self::from_fn) but fills rows independently,
    /// which lets the caller parallelize.
    pub fn from_rows(n: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        check_dim(n, rows.len())?;
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            check_dim(n, r.len())?;
            data.extend(r);
        }
        Self::from_row_major(n, data)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| super::dot(self.row(i), x)).collect()
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// `self + shift * I`
    pub fn shifted(&self, shift: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            out.data[i * self.n + i] += shift;
        }
        out
    }

    /// Congruence `Cᵀ · self · C` for a square row-major `C`.
    pub fn congruence(&self, c: &[f64]) -> Self {
        let n = self.n;
        assert_eq!(c.len(), n * n);
        // t = self * c
        let mut t = vec![0.0; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let crow = &c[k * n..(k + 1) * n];
                let trow = &mut t[i * n..(i + 1) * n];
                for (tv, cv) in trow.iter_mut().zip(crow) {
                    *tv += a * cv;
                }
            }
        }
        let mut out = vec![0.0; n * n];
        for k in 0..n {
            for i in 0..n {
                let ck = c[k * n + i];
                if ck == 0.0 {
                    continue;
                }
                let trow = &t[k * n..(k + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for (ov, tv) in orow.iter_mut().zip(trow) {
                    *ov += ck * tv;
                }
            }
        }
        Self::from_row_major(n, out).expect("square")
    }
}

impl LinearOperator for DenseSym {
    fn dim(&self) -> usize {
        self.n
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matvec(x)
    }
}
