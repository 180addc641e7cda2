//! Cyclic Jacobi eigensolver for dense symmetric matrices.
//!
//! Slow (O(n³) per sweep) but accurate to a few ulps of ‖m‖; used as the
//! reference oracle and for small dense problems.

use super::DenseSym;
use crate::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `m = V Λ Vᵀ` with eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymEig {
    pub values: Vec<f64>,
    /// `vectors[k]` is the unit eigenvector for `values[k]`.
    pub vectors: Vec<Vec<f64>>,
}

impl SymEig {
    pub fn n(&self) -> usize {
        self.values.len()
    }

    /// `V f(Λ) Vᵀ`, e.g. matrix square roots for test oracles.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DenseSym {
        let fl: Vec<f64> = self.values.iter().map(|&l| f(l)).collect();
        let n = self.n();
        DenseSym::from_fn(n, |i, j| {
            (0..n).map(|k| fl[k] * self.vectors[k][i] * self.vectors[k][j]).sum()
        })
    }

    /// `‖m V − V Λ‖_F`
    pub fn residual(&self, m: &DenseSym) -> f64 {
        let mut s = 0.0;
        for (l, v) in self.values.iter().zip(&self.vectors) {
            let mv = m.matvec(v);
            s += mv.iter().zip(v).map(|(a, b)| (a - l * b).powi(2)).sum::<f64>();
        }
        s.sqrt()
    }

    /// `‖Vᵀ V − I‖_F`
    pub fn orthogonality_error(&self) -> f64 {
        let n = self.n();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                let d = super::dot(&self.vectors[i], &self.vectors[j]) - if i == j { 1.0 } else { 0.0 };
                s += d * d;
            }
        }
        s.sqrt()
    }
}

pub fn dense_sym_eig(m: &DenseSym) -> Result<SymEig> {
    let n = m.n();
    let mut a = m.as_row_major().to_vec();
    // v is stored row-major with eigenvectors as columns
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let scale = m.frobenius();
    if scale == 0.0 {
        return Ok(collect(n, &a, &v));
    }
    let target = f64::EPSILON * scale * 1e-2;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .map(|(i, j)| a[i * n + j] * a[i * n + j])
            .sum::<f64>()
            .sqrt();
        if off <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // skip rotations that would not change the diagonal in floating point
                if apq.abs() < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()).max(f64::MIN_POSITIVE) {
                    a[p * n + q] = 0.0;
                    a[q * n + p] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence(format!("Jacobi sweep cap ({MAX_SWEEPS}) reached")));
    }
    Ok(collect(n, &a, &v))
}

fn collect(n: usize, a: &[f64], v: &[f64]) -> SymEig {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j]));
    let values = order.iter().map(|&k| a[k * n + k]).collect();
    let vectors = order
        .iter()
        .map(|&k| {
            let mut col: Vec<f64> = (0..n).map(|i| v[i * n + k]).collect();
            // deterministic sign: largest-magnitude entry positive
            let imax = (0..n).max_by(|&i, &j| col[i].abs().total_cmp(&col[j].abs())).unwrap_or(0);
            if col[imax] < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    SymEig { values, vectors }
}
