//! Lanczos with full reorthogonalization in a caller-supplied inner product.

use super::{dot, LinearOperator, Rng};
use crate::{Error, Result};

/// Inner product `⟨x, y⟩ = xᵀ G y`, exposed through the Gram operator `G`.
pub trait InnerProduct: Send + Sync {
    fn gram(&self, x: &[f64]) -> Vec<f64>;
}

pub struct EuclideanInner;

impl InnerProduct for EuclideanInner {
    fn gram(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }
}

/// Inner product induced by an SPD operator.
pub struct GramInner<'a>(pub &'a dyn LinearOperator);

impl InnerProduct for GramInner<'_> {
    fn gram(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply(x)
    }
}

#[derive(Debug, Clone)]
pub struct LanczosOptions {
    /// Relative accuracy requested for the wanted Ritz values.
    pub tol: f64,
    pub maxit: usize,
    pub seed: u64,
    pub start: Option<Vec<f64>>,
    /// Number of smallest / largest Ritz values that must converge.
    pub n_low: usize,
    pub n_high: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: 500, seed: 0x5eed, start: None, n_low: 1, n_high: 1 }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    /// Ritz values, ascending.
    pub values: Vec<f64>,
    /// A-posteriori error estimates `min(res, res²/gap)` per Ritz value.
    pub estimates: Vec<f64>,
    pub steps: usize,
    basis: Vec<Vec<f64>>,
    /// eigenvectors of the tridiagonal matrix, `s[i]` for `values[i]`
    s: Vec<Vec<f64>>,
}

impl LanczosResult {
    pub fn ritz_vector(&self, i: usize) -> Vec<f64> {
        let n = self.basis[0].len();
        let mut y = vec![0.0; n];
        for (c, v) in self.s[i].iter().zip(&self.basis) {
            super::axpy(*c, v, &mut y);
        }
        y
    }
}

/// Runs Lanczos on `op` (self-adjoint w.r.t. `inner`) until the requested
/// extremal Ritz values are converged.
pub fn lanczos(op: &dyn LinearOperator, inner: &dyn InnerProduct, opts: &LanczosOptions) -> Result<LanczosResult> {
    let n = op.dim();
    let maxit = opts.maxit.min(n).max(1);
    let mut v0 = match &opts.start {
        Some(s) => {
            super::check_dim(n, s.len())?;
            s.clone()
        }
        None => Rng::new(opts.seed).gaussian_vector(n),
    };
    let mut gv = inner.gram(&v0);
    let nrm2 = dot(&v0, &gv);
    if !(nrm2 > 0.0) {
        return Err(if nrm2 == 0.0 && v0.iter().all(|&x| x == 0.0) { Error::ZeroVector } else { Error::InnerProductNotPositive });
    }
    let inv = 1.0 / nrm2.sqrt();
    super::scale(inv, &mut v0);
    super::scale(inv, &mut gv);

    let mut basis = vec![v0];
    let mut gbasis = vec![gv];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut next_check = 4usize;

    for j in 0..maxit {
        let mut w = op.apply(&basis[j]);
        let a = dot(&w, &gbasis[j]);
        alpha.push(a);
        super::axpy(-a, &basis[j], &mut w);
        if j > 0 {
            super::axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        // two passes of classical Gram–Schmidt against the whole basis
        for _ in 0..2 {
            for (v, gvi) in basis.iter().zip(&gbasis) {
                let c = dot(&w, gvi);
                super::axpy(-c, v, &mut w);
            }
        }
        let gw = inner.gram(&w);
        let b2 = dot(&w, &gw);
        if b2 < 0.0 && b2.abs() > 1e-12 * a.abs().max(1e-300) {
            return Err(Error::InnerProductNotPositive);
        }
        let b = b2.max(0.0).sqrt();
        let k = j + 1;
        let scale_est = alpha.iter().map(|x| x.abs()).fold(0.0, f64::max).max(beta.iter().copied().fold(0.0, f64::max));
        let invariant = b <= 1e-13 * scale_est.max(f64::MIN_POSITIVE) || k == n;

        if invariant || k >= next_check || k == maxit {
            let (vals, s) = tridiagonal_eig(&alpha, &beta)?;
            let est = estimates(&vals, &s, if invariant { 0.0 } else { b });
            let done = wanted_converged(&vals, &est, opts);
            if done || invariant {
                return Ok(LanczosResult { values: vals, estimates: est, steps: k, basis, s });
            }
            if k == maxit {
                return Err(Error::MaxIterations { iterations: k, residual: worst(&vals, &est, opts), best: None });
            }
            next_check = k + (k / 8).max(4);
        }
        beta.push(b);
        let inv = 1.0 / b;
        super::scale(inv, &mut w);
        let mut gw = gw;
        super::scale(inv, &mut gw);
        basis.push(w);
        gbasis.push(gw);
    }
    unreachable!("loop returns at k == maxit")
}

fn estimates(vals: &[f64], s: &[Vec<f64>], b: f64) -> Vec<f64> {
    let k = vals.len();
    (0..k)
        .map(|i| {
            let res = (b * s[i][k - 1]).abs();
            let gap = (0..k)
                .filter(|&j| j != i)
                .map(|j| (vals[j] - vals[i]).abs())
                .fold(f64::INFINITY, f64::min);
            if gap.is_finite() && gap > 0.0 {
                res.min(res * res / gap)
            } else {
                res
            }
        })
        .collect()
}

fn wanted(k: usize, opts: &LanczosOptions) -> impl Iterator<Item = usize> {
    let low = opts.n_low.min(k);
    let high = opts.n_high.min(k);
    (0..low).chain((k - high)..k)
}

fn wanted_converged(vals: &[f64], est: &[f64], opts: &LanczosOptions) -> bool {
    let k = vals.len();
    if k < opts.n_low.max(opts.n_high) {
        return false;
    }
    wanted(k, opts).all(|i| est[i] <= opts.tol * vals[i].abs())
}

fn worst(vals: &[f64], est: &[f64], opts: &LanczosOptions) -> f64 {
    wanted(vals.len(), opts).map(|i| est[i] / vals[i].abs().max(f64::MIN_POSITIVE)).fold(0.0, f64::max)
}

/// Extremal eigenvalues `(ν_min, ν_max)` of `op`, self-adjoint w.r.t. `inner`.
pub fn lanczos_extremal(
    op: &dyn LinearOperator,
    inner: &dyn InnerProduct,
    tol: f64,
    maxit: usize,
) -> Result<(f64, f64)> {
    let opts = LanczosOptions { tol, maxit, ..Default::default() };
    let r = lanczos(op, inner, &opts)?;
    Ok((r.values[0], *r.values.last().unwrap()))
}

/// Symmetric tridiagonal eigenproblem by implicit QL with Wilkinson shifts.
/// Returns ascending eigenvalues and the matching eigenvectors.
pub fn tridiagonal_eig(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = diag.len();
    let mut d = diag.to_vec();
    let mut e = vec![0.0; n];
    e[..n - 1].copy_from_slice(&off[..n - 1]);
    // z[k] is the k-th eigenvector (stored as rows for cache-friendly rotation)
    let mut z = vec![vec![0.0; n]; n];
    for (i, row) in z.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::NoConvergence("tridiagonal QL".into()));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut underflow = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                // rotate eigenvector columns i and i+1
                for row in z.iter_mut() {
                    let fz = row[i + 1];
                    row[i + 1] = s * row[i] + c * fz;
                    row[i] = c * row[i] - s * fz;
                }
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let vals = order.iter().map(|&k| d[k]).collect();
    let vecs = order.iter().map(|&k| z.iter().map(|row| row[k]).collect()).collect();
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dense_sym_eig, DenseSym};

    #[test]
    fn tridiagonal_matches_jacobi() {
        let d = [2.0, 3.0, -1.0, 4.0, 0.5];
        let e = [1.0, 0.3, -2.0, 0.7];
        let (vals, vecs) = tridiagonal_eig(&d, &e).unwrap();
        let m = DenseSym::from_fn(5, |i, j| {
            if i == j {
                d[i]
            } else if j == i + 1 {
                e[i]
            } else {
                0.0
            }
        });
        let oracle = dense_sym_eig(&m).unwrap();
        for (a, b) in vals.iter().zip(&oracle.values) {
            assert!((a - b).abs() < 1e-13);
        }
        for (l, v) in vals.iter().zip(&vecs) {
            let mv = m.matvec(v);
            let r: f64 = mv.iter().zip(v).map(|(x, y)| (x - l * y).powi(2)).sum::<f64>().sqrt();
            assert!(r < 1e-13);
        }
    }

    #[test]
    fn diagonal_extremes() {
        let t = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let (lo, hi) = lanczos_extremal(&t, &EuclideanInner, 1e-12, 10).unwrap();
        assert!((lo - 1.0).abs() < 1e-12);
        assert!((hi - 4.0).abs() < 1e-12);
    }

    #[test]
    fn indefinite_inner_product_rejected() {
        let t = DenseSym::diag(&[1.0, 2.0]);
        let g = DenseSym::diag(&[-1.0, -1.0]);
        assert!(matches!(
            lanczos_extremal(&t, &GramInner(&g), 1e-10, 10),
            Err(Error::InnerProductNotPositive)
        ));
    }
}
