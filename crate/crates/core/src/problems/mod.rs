//! Eigenproblem generators and the reference eigensolver.

pub mod grid;
pub mod kernel;
pub mod random;

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

pub use grid::{fd_laplacian, fem_p1, mesh_hierarchy, MeshHierarchy};
pub use kernel::{kernel_matrix_dense, KernelKind, KernelMatrix, KernelSpec};
pub use random::{random_orthogonal, random_spd, spd_with_spectrum};

use crate::linalg::{
    axpy, cholesky, dense_sym_eig, dot, lanczos, norm, CholFactor, DenseSym, EuclideanInner, LanczosOptions,
    LinearOperator, Precision, SkylineCholesky, SparseSym,
};
use crate::par::Execution;
use crate::{Error, Result};

/// Problems up to this size get their reference spectrum from the dense Jacobi oracle.
pub const DENSE_REFERENCE_CAP: usize = 300;

pub enum Operator {
    Dense(DenseSym),
    Sparse(SparseSym),
    /// `Â = L⁻¹ K L⁻ᵀ` for the pencil `(K, M)` with `M = L Lᵀ`.
    Reduced { stiffness: SparseSym, mass: SparseSym, mass_factor: SkylineCholesky },
}

/// Smallest eigenpair and spectral bounds of a problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Reference {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambdan: f64,
    /// Unit Euclidean norm, largest-magnitude entry positive.
    pub u_star: Vec<f64>,
}

pub struct EigenProblem {
    label: String,
    op: Operator,
    mesh_width: Option<f64>,
    reference: OnceLock<Reference>,
}

impl EigenProblem {
    pub fn dense(label: impl Into<String>, a: DenseSym) -> Self {
        Self::with_operator(label, Operator::Dense(a), None)
    }

    pub fn sparse(label: impl Into<String>, a: SparseSym) -> Self {
        Self::with_operator(label, Operator::Sparse(a), None)
    }

    fn with_operator(label: impl Into<String>, op: Operator, mesh_width: Option<f64>) -> Self {
        Self { label: label.into(), op, mesh_width, reference: OnceLock::new() }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    /// Fine mesh width for grid-based problems.
    pub fn mesh_width(&self) -> Option<f64> {
        self.mesh_width
    }

    pub fn as_dense(&self) -> Option<&DenseSym> {
        match &self.op {
            Operator::Dense(a) => Some(a),
            _ => None,
        }
    }

    /// The explicit dense matrix, assembled column by column when needed.
    pub fn to_dense(&self) -> DenseSym {
        match &self.op {
            Operator::Dense(a) => a.clone(),
            Operator::Sparse(a) => a.to_dense(),
            Operator::Reduced { .. } => {
                let n = self.dim();
                let cols: Vec<Vec<f64>> = (0..n).map(|j| self.apply(&crate::linalg::unit(n, j))).collect();
                DenseSym::from_fn(n, |i, j| 0.5 * (cols[j][i] + cols[i][j]))
            }
        }
    }

    /// A binary64 solver for `A x = b`.
    pub fn exact_solver(&self) -> Result<ExactSolver> {
        let (kind, mass_factor) = match &self.op {
            Operator::Dense(a) => (SolverKind::Dense(cholesky(a, Precision::Binary64)?), None),
            Operator::Sparse(a) => (SolverKind::Sparse(SkylineCholesky::factor(a)?), None),
            Operator::Reduced { stiffness, mass_factor, .. } => {
                (SolverKind::Sparse(SkylineCholesky::factor(stiffness)?), Some(mass_factor.clone()))
            }
        };
        Ok(ExactSolver { n: self.dim(), kind, mass_factor })
    }

    /// Cached reference spectrum, computed on first use.
    pub fn reference(&self) -> Result<&Reference> {
        if let Some(r) = self.reference.get() {
            return Ok(r);
        }
        let r = reference_eigs(self)?;
        Ok(self.reference.get_or_init(|| r))
    }

    /// Installs a known reference spectrum (e.g. analytic).
    pub fn set_reference(&self, r: Reference) -> bool {
        self.reference.set(r).is_ok()
    }
}

impl LinearOperator for EigenProblem {
    fn dim(&self) -> usize {
        match &self.op {
            Operator::Dense(a) => a.n(),
            Operator::Sparse(a) => a.n(),
            Operator::Reduced { stiffness, .. } => stiffness.n(),
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match &self.op {
            Operator::Dense(a) => a.matvec(x),
            Operator::Sparse(a) => a.matvec(x),
            Operator::Reduced { stiffness, mass_factor, .. } => {
                mass_factor.solve_l(&stiffness.matvec(&mass_factor.solve_lt(x)))
            }
        }
    }
}

enum SolverKind {
    Dense(CholFactor),
    Sparse(SkylineCholesky),
}

/// Exact binary64 inverse of a problem operator.
pub struct ExactSolver {
    n: usize,
    kind: SolverKind,
    mass_factor: Option<SkylineCholesky>,
}

impl LinearOperator for ExactSolver {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        match (&self.kind, &self.mass_factor) {
            (SolverKind::Dense(f), _) => f.solve_binary64(x),
            // Â⁻¹ = Lᵀ K⁻¹ L
            (SolverKind::Sparse(f), Some(l)) => l.mul_lt(&f.solve(&l.mul_l(x))),
            (SolverKind::Sparse(f), None) => f.solve(x),
        }
    }
}

pub fn laplace_fd(h: f64) -> Result<EigenProblem> {
    let a = fd_laplacian(h)?;
    Ok(EigenProblem::with_operator(format!("laplace-fd:h={h}"), Operator::Sparse(a), Some(h)))
}

/// Analytic spectrum `(4/h²)(sin²(kπh/2) + sin²(lπh/2))` of the FD Laplacian, ascending.
pub fn fd_spectrum(h: f64) -> Result<Vec<f64>> {
    let m = grid::cells_per_side(h)?;
    let s = |k: usize| (k as f64 * std::f64::consts::PI * h / 2.0).sin().powi(2);
    let mut v: Vec<f64> = (1..m).flat_map(|k| (1..m).map(move |l| (4.0 / (h * h)) * (s(k) + s(l)))).collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// The P1 pencil `(K, M)` reduced to standard form.
pub fn laplace_fem(h: f64) -> Result<EigenProblem> {
    let (k, m) = fem_p1(h)?;
    let mut p = generalized_reduce(k, m)?;
    p.label = format!("laplace-fem:h={h}");
    p.mesh_width = Some(h);
    Ok(p)
}

pub fn generalized_reduce(a: SparseSym, m: SparseSym) -> Result<EigenProblem> {
    crate::linalg::check_dim(a.n(), m.n())?;
    let mass_factor = SkylineCholesky::factor(&m)?;
    SkylineCholesky::factor(&a)?;
    Ok(EigenProblem::with_operator(
        "generalized",
        Operator::Reduced { stiffness: a, mass: m, mass_factor },
        None,
    ))
}

pub fn kernel_problem(spec: &KernelSpec, exec: Execution) -> Result<(EigenProblem, KernelMatrix)> {
    let k = kernel_matrix_dense(spec, exec)?;
    let label = match spec.kind {
        KernelKind::Laplacian => format!("kernel-laplace:n={},seed={}", spec.n, spec.seed),
        KernelKind::PolyComplex => format!("kernel-poly:n={},seed={}", spec.n, spec.seed),
    };
    Ok((EigenProblem::dense(label, k.matrix.clone()), k))
}

fn canonical_sign(mut u: Vec<f64>) -> Vec<f64> {
    let nu = norm(&u);
    let k = (0..u.len()).max_by(|&a, &b| u[a].abs().total_cmp(&u[b].abs())).unwrap_or(0);
    let s = if u[k] < 0.0 { -1.0 / nu } else { 1.0 / nu };
    for x in u.iter_mut() {
        *x *= s;
    }
    u
}

fn check_gap(lambda1: f64, lambda2: f64, lambdan: f64) -> Result<()> {
    if lambda2 - lambda1 <= 1e-9 * lambdan {
        Err(Error::DegenerateSmallestEigenvalue { lambda1, lambda2 })
    } else {
        Ok(())
    }
}

/// λ1, λ2, λn and the unit eigenvector for λ1.
pub fn reference_eigs(p: &EigenProblem) -> Result<Reference> {
    let n = p.dim();
    if n < 2 {
        return Err(Error::InvalidArgument("reference spectrum needs dimension >= 2".into()));
    }
    if n <= DENSE_REFERENCE_CAP {
        let e = dense_sym_eig(&p.to_dense())?;
        let (lambda1, lambda2, lambdan) = (e.values[0], e.values[1], e.values[n - 1]);
        check_gap(lambda1, lambda2, lambdan)?;
        return Ok(Reference { lambda1, lambda2, lambdan, u_star: canonical_sign(e.vectors[0].clone()) });
    }

    let inv = p.exact_solver()?;
    let opts = LanczosOptions { tol: 1e-13, maxit: n.min(600), n_low: 0, n_high: 2, ..Default::default() };
    let run = lanczos(&inv, &EuclideanInner, &opts)?;
    let k = run.values.len();
    let lambda2_est = 1.0 / run.values[k - 2];
    let mut u = run.ritz_vector(k - 1);
    let mut lambda1 = 0.0;
    // a few inverse-iteration sweeps polish the Ritz vector
    for sweep in 0..60 {
        let nu = norm(&u);
        for x in u.iter_mut() {
            *x /= nu;
        }
        let au = p.apply(&u);
        lambda1 = dot(&u, &au);
        let mut r = au;
        axpy(-lambda1, &u, &mut r);
        if norm(&r) <= 1e-12 * lambda1 {
            break;
        }
        if sweep == 59 {
            return Err(Error::NoConvergence("reference eigenvector refinement".into()));
        }
        u = inv.apply(&u);
    }
    let hi = lanczos(p, &EuclideanInner, &LanczosOptions { tol: 1e-12, maxit: n.min(600), n_low: 0, n_high: 1, ..Default::default() })?;
    let lambdan = *hi.values.last().unwrap();
    check_gap(lambda1, lambda2_est, lambdan)?;
    Ok(Reference { lambda1, lambda2: lambda2_est, lambdan, u_star: canonical_sign(u) })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_reference() {
        let p = EigenProblem::dense("d", DenseSym::diag(&[1.0, 2.0, 4.0]));
        let r = p.reference().unwrap();
        assert_eq!((r.lambda1, r.lambda2, r.lambdan), (1.0, 2.0, 4.0));
        assert_eq!(r.u_star, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn degenerate_rejected() {
        let p = EigenProblem::dense("d", DenseSym::diag(&[1.0, 1.0, 4.0]));
        assert!(matches!(p.reference(), Err(Error::DegenerateSmallestEigenvalue { .. })));
    }

    #[test]
    fn diagonal_pencil() {
        let p = generalized_reduce(SparseSym::diag(&[2.0, 6.0]), SparseSym::diag(&[1.0, 2.0])).unwrap();
        let r = p.reference().unwrap();
        assert!((r.lambda1 - 2.0).abs() < 1e-14 && (r.lambda2 - 3.0).abs() < 1e-14);
    }

    #[test]
    fn fd_quarter_grid() {
        let p = laplace_fd(0.25).unwrap();
        let want = 128.0 * (std::f64::consts::PI / 8.0).sin().powi(2);
        assert!((p.reference().unwrap().lambda1 - want).abs() < 1e-10);
    }

    #[test]
    fn lanczos_path_matches_analytic_spectrum() {
        let h = 1.0 / 32.0;
        let p = laplace_fd(h).unwrap();
        assert!(p.dim() > DENSE_REFERENCE_CAP);
        let r = p.reference().unwrap();
        let s = fd_spectrum(h).unwrap();
        assert!((r.lambda1 - s[0]).abs() <= 1e-11 * s[0]);
        assert!((r.lambda2 - s[1]).abs() <= 1e-11 * s[1]);
        assert!((r.lambdan - s[s.len() - 1]).abs() <= 1e-11 * s[s.len() - 1]);
    }
}
