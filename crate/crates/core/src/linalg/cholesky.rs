//! Dense Cholesky factorization in binary64 or genuine binary32 arithmetic.

use serde::{Deserialize, Serialize};

use super::{check_dim, DenseSym};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Precision {
    Binary64,
    Binary32,
}

impl Precision {
    /// Unit roundoff.
    pub fn unit_roundoff(self) -> f64 {
        match self {
            Precision::Binary64 => 2f64.powi(-53),
            Precision::Binary32 => 2f64.powi(-24),
        }
    }
}

#[derive(Debug, Clone)]
enum Storage {
    F64(Vec<f64>),
    F32(Vec<f32>),
}

/// Lower-triangular Cholesky factor `L` with `m = L Lᵀ`, packed by rows.
#[derive(Debug, Clone)]
pub struct CholFactor {
    n: usize,
    storage: Storage,
}

#[inline]
fn idx(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

macro_rules! factor_impl {
    ($name:ident, $t:ty) => {
        fn $name(m: &DenseSym) -> Result<Vec<$t>> {
            let n = m.n();
            let mut l = vec![0 as $t; n * (n + 1) / 2];
            for i in 0..n {
                for j in 0..=i {
                    let mut s = m.get(i, j) as $t;
                    let (ri, rj) = (idx(i, 0), idx(j, 0));
                    for k in 0..j {
                        s -= l[ri + k] * l[rj + k];
                    }
                    if i == j {
                        if !(s > 0 as $t) || !s.is_finite() {
                            return Err(Error::NotSpd { pivot: i });
                        }
                        l[ri + i] = s.sqrt();
                    } else {
                        l[ri + j] = s / l[rj + j];
                    }
                }
            }
            Ok(l)
        }
    };
}

factor_impl!(factor_f64, f64);
factor_impl!(factor_f32, f32);

macro_rules! solve_impl {
    ($name:ident, $t:ty) => {
        /// Forward then backward substitution with `L` and `Lᵀ`.
        fn $name(n: usize, l: &[$t], rhs: &mut [$t]) {
            for i in 0..n {
                let ri = idx(i, 0);
                let mut s = rhs[i];
                for k in 0..i {
                    s -= l[ri + k] * rhs[k];
                }
                rhs[i] = s / l[ri + i];
            }
            for i in (0..n).rev() {
                let mut s = rhs[i];
                for k in (i + 1)..n {
                    s -= l[idx(k, i)] * rhs[k];
                }
                rhs[i] = s / l[idx(i, i)];
            }
        }
    };
}

solve_impl!(solve_f64, f64);
solve_impl!(solve_f32, f32);

macro_rules! llt_impl {
    ($name:ident, $t:ty) => {
        /// `L (Lᵀ v)`
        fn $name(n: usize, l: &[$t], v: &[$t]) -> Vec<$t> {
            let mut w = vec![0 as $t; n];
            for i in 0..n {
                let mut s = 0 as $t;
                for k in i..n {
                    s += l[idx(k, i)] * v[k];
                }
                w[i] = s;
            }
            (0..n)
                .map(|i| {
                    let ri = idx(i, 0);
                    let mut s = 0 as $t;
                    for k in 0..=i {
                        s += l[ri + k] * w[k];
                    }
                    s
                })
                .collect()
        }
    };
}

llt_impl!(llt_f64, f64);
llt_impl!(llt_f32, f32);

/// Factorizes `m = L Lᵀ`. In binary32 mode the input is rounded to binary32
/// first and every operation is carried out in binary32.
pub fn cholesky(m: &DenseSym, precision: Precision) -> Result<CholFactor> {
    let storage = match precision {
        Precision::Binary64 => Storage::F64(factor_f64(m)?),
        Precision::Binary32 => Storage::F32(factor_f32(m)?),
    };
    Ok(CholFactor { n: m.n(), storage })
}

/// Solves `L Lᵀ x = rhs`, in the factor's own precision.
pub fn chol_solve(f: &CholFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    check_dim(f.n, rhs.len())?;
    Ok(f.solve(rhs))
}

impl CholFactor {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn precision(&self) -> Precision {
        match self.storage {
            Storage::F64(_) => Precision::Binary64,
            Storage::F32(_) => Precision::Binary32,
        }
    }

    /// Entry `L[i][j]` widened to binary64 (zero above the diagonal).
    pub fn lower(&self, i: usize, j: usize) -> f64 {
        if j > i {
            return 0.0;
        }
        match &self.storage {
            Storage::F64(l) => l[idx(i, j)],
            Storage::F32(l) => l[idx(i, j)] as f64,
        }
    }

    pub(crate) fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::F64(l) => {
                let mut x = rhs.to_vec();
                solve_f64(self.n, l, &mut x);
                x
            }
            Storage::F32(l) => {
                let mut x: Vec<f32> = rhs.iter().map(|&v| v as f32).collect();
                solve_f32(self.n, l, &mut x);
                x.into_iter().map(f64::from).collect()
            }
        }
    }

    /// Solves with the stored factor in binary64 arithmetic regardless of
    /// the storage precision; this is the exact inverse of [`Self::to_dense_llt`]
    /// up to binary64 rounding.
    pub fn solve_binary64(&self, rhs: &[f64]) -> Vec<f64> {
        let mut x = rhs.to_vec();
        solve_f64(self.n, &self.widened(), &mut x);
        x
    }

    /// `L (Lᵀ v)` in the factor's precision.
    pub fn mul_llt(&self, v: &[f64]) -> Vec<f64> {
        match &self.storage {
            Storage::F64(l) => llt_f64(self.n, l, v),
            Storage::F32(l) => {
                let v32: Vec<f32> = v.iter().map(|&x| x as f32).collect();
                llt_f32(self.n, l, &v32).into_iter().map(f64::from).collect()
            }
        }
    }

    /// `L (Lᵀ v)` evaluated in binary64.
    pub fn mul_llt_binary64(&self, v: &[f64]) -> Vec<f64> {
        llt_f64(self.n, &self.widened(), v)
    }

    fn widened(&self) -> std::borrow::Cow<'_, [f64]> {
        match &self.storage {
            Storage::F64(l) => std::borrow::Cow::Borrowed(l),
            Storage::F32(l) => std::borrow::Cow::Owned(l.iter().map(|&v| v as f64).collect()),
        }
    }

    /// The product `L Lᵀ` formed in binary64.
    pub fn to_dense_llt(&self) -> DenseSym {
        let l = self.widened();
        DenseSym::from_fn(self.n, |i, j| {
            let (ri, rj) = (idx(i, 0), idx(j, 0));
            (0..=i.min(j)).map(|k| l[ri + k] * l[rj + k]).sum()
        })
    }
}
