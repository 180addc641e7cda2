//! SPD preconditioners exposing `B⁻¹` always and `B` exactly or by nested solves.

mod ddm;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use ddm::{make_ddm, DdmPreconditioner};

use crate::linalg::{cholesky, dot, norm, pcg, CholFactor, DenseSym, LinearOperator, Precision, Rng, SkylineCholesky};
use crate::problems::{EigenProblem, ExactSolver, Operator};
use crate::{Error, Result};

/// Default relative tolerance for forward application by nested PCG.
pub const DEFAULT_FWD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FwdMode {
    Exact,
    Iterative { tol: f64 },
}

pub trait Preconditioner: Send + Sync {
    fn dim(&self) -> usize;
    /// `B⁻¹ v`
    fn apply_inv(&self, v: &[f64]) -> Vec<f64>;
    /// `B v`
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn fwd_mode(&self) -> FwdMode;
    fn label(&self) -> String;
}

impl<P: Preconditioner + ?Sized> Preconditioner for Arc<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        (**self).apply_inv(v)
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        (**self).apply_fwd(v)
    }
    fn fwd_mode(&self) -> FwdMode {
        (**self).fwd_mode()
    }
    fn label(&self) -> String {
        (**self).label()
    }
}

/// `B⁻¹` as a [`LinearOperator`].
pub struct InvOp<'a>(pub &'a dyn Preconditioner);

impl LinearOperator for InvOp<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_inv(x)
    }
}

/// `B` as a [`LinearOperator`]; only built for preconditioners with exact forward mode.
pub struct FwdOp<'a>(&'a dyn Preconditioner);

impl<'a> FwdOp<'a> {
    pub fn new(p: &'a dyn Preconditioner) -> Option<Self> {
        (p.fwd_mode() == FwdMode::Exact).then_some(Self(p))
    }
}

impl LinearOperator for FwdOp<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.apply_fwd(x).expect("exact forward application cannot fail")
    }
}

pub struct IdentityPreconditioner(pub usize);

pub fn make_identity(n: usize) -> IdentityPreconditioner {
    IdentityPreconditioner(n)
}

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        v.to_vec()
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(v.to_vec())
    }
    fn fwd_mode(&self) -> FwdMode {
        FwdMode::Exact
    }
    fn label(&self) -> String {
        "identity".into()
    }
}

/// `B = A`, applied through a cached binary64 factorization.
pub struct ExactPreconditioner {
    problem: Arc<EigenProblem>,
    solver: ExactSolver,
}

pub fn make_exact(problem: Arc<EigenProblem>) -> Result<ExactPreconditioner> {
    let solver = problem.exact_solver()?;
    Ok(ExactPreconditioner { problem, solver })
}

impl Preconditioner for ExactPreconditioner {
    fn dim(&self) -> usize {
        self.solver.dim()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.solver.apply(v)
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.problem.apply(v))
    }
    fn fwd_mode(&self) -> FwdMode {
        FwdMode::Exact
    }
    fn label(&self) -> String {
        "exact".into()
    }
}

/// An explicitly given dense SPD matrix `B`.
pub struct DensePreconditioner {
    matrix: DenseSym,
    factor: CholFactor,
}

impl DensePreconditioner {
    pub fn new(matrix: DenseSym) -> Result<Self> {
        let factor = cholesky(&matrix, Precision::Binary64)?;
        Ok(Self { matrix, factor })
    }

    pub fn matrix(&self) -> &DenseSym {
        &self.matrix
    }
}

impl Preconditioner for DensePreconditioner {
    fn dim(&self) -> usize {
        self.matrix.n()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.factor.solve_binary64(v)
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.matrix.matvec(v))
    }
    fn fwd_mode(&self) -> FwdMode {
        FwdMode::Exact
    }
    fn label(&self) -> String {
        "dense".into()
    }
}

/// `B/η`, i.e. `B⁻¹` scaled by `η`.
pub struct ScaledPreconditioner {
    inner: Arc<dyn Preconditioner>,
    eta: f64,
}

impl ScaledPreconditioner {
    pub fn new(inner: Arc<dyn Preconditioner>, eta: f64) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {eta} must be positive")));
        }
        Ok(Self { inner, eta })
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

/// Wraps `p` with `η = 2/(ν_min + ν_max)`; returns the wrapper and `ρ_B`.
pub fn spectral_scale(p: Arc<dyn Preconditioner>, nu_min: f64, nu_max: f64) -> Result<(ScaledPreconditioner, f64)> {
    if !(nu_min > 0.0 && nu_min <= nu_max) {
        return Err(Error::InvalidArgument(format!("need 0 < nu_min <= nu_max, got {nu_min}, {nu_max}")));
    }
    let eta = 2.0 / (nu_min + nu_max);
    let rho_b = (1.0 - eta * nu_min).abs().max((1.0 - eta * nu_max).abs());
    Ok((ScaledPreconditioner::new(p, eta)?, rho_b))
}

impl Preconditioner for ScaledPreconditioner {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.inner.apply_inv(v).into_iter().map(|x| self.eta * x).collect()
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.inner.apply_fwd(v)?.into_iter().map(|x| x / self.eta).collect())
    }
    fn fwd_mode(&self) -> FwdMode {
        self.inner.fwd_mode()
    }
    fn label(&self) -> String {
        format!("scaled:{}", self.inner.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MpMode {
    /// Substitutions carried out in binary32 arithmetic.
    Binary32,
    /// The binary32 factor `L̂` applied exactly in binary64, so `B = L̂L̂ᵀ` is
    /// symmetric to working precision.
    ExactFactor,
}

/// `B = L̂L̂ᵀ` with `L̂` the Cholesky factor computed in binary32.
pub struct MpCholesky {
    factor: CholFactor,
    mode: MpMode,
}

pub fn make_mp_cholesky(a: &DenseSym) -> Result<MpCholesky> {
    let factor = cholesky(a, Precision::Binary32).map_err(|e| match e {
        Error::NotSpd { pivot } => Error::NotSpdInLowPrecision { pivot },
        other => other,
    })?;
    Ok(MpCholesky { factor, mode: MpMode::Binary32 })
}

impl MpCholesky {
    pub fn with_mode(mut self, mode: MpMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn mode(&self) -> MpMode {
        self.mode
    }

    pub fn factor(&self) -> &CholFactor {
        &self.factor
    }
}

impl Preconditioner for MpCholesky {
    fn dim(&self) -> usize {
        self.factor.n()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        match self.mode {
            MpMode::Binary32 => self.factor.solve(v),
            MpMode::ExactFactor => self.factor.solve_binary64(v),
        }
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(match self.mode {
            MpMode::Binary32 => self.factor.mul_llt(v),
            MpMode::ExactFactor => self.factor.mul_llt_binary64(v),
        })
    }
    fn fwd_mode(&self) -> FwdMode {
        FwdMode::Exact
    }
    fn label(&self) -> String {
        match self.mode {
            MpMode::Binary32 => "mp-chol".into(),
            MpMode::ExactFactor => "mp-chol(exact-factor)".into(),
        }
    }
}

/// `ε_l = 4n(3n+1)(λn/λ1)·2⁻²⁴` and whether it is below one.
pub fn epsilon_l(n: usize, lambda1: f64, lambdan: f64) -> (f64, bool) {
    let n = n as f64;
    let eps = 4.0 * n * (3.0 * n + 1.0) * (lambdan / lambda1) * Precision::Binary32.unit_roundoff();
    (eps, eps < 1.0)
}

/// `B̂ = L⁻¹ B L⁻ᵀ` for a mass matrix `M = LLᵀ`, so `B̂⁻¹ = Lᵀ B⁻¹ L`.
pub struct HattedPreconditioner {
    inner: Arc<dyn Preconditioner>,
    mass_factor: SkylineCholesky,
}

impl HattedPreconditioner {
    pub fn new(inner: Arc<dyn Preconditioner>, mass_factor: SkylineCholesky) -> Result<Self> {
        crate::linalg::check_dim(inner.dim(), mass_factor.n())?;
        Ok(Self { inner, mass_factor })
    }

    /// Wraps `inner` (built on the stiffness matrix) for a reduced problem;
    /// any other problem gets `inner` back unchanged.
    pub fn for_problem(problem: &EigenProblem, inner: Arc<dyn Preconditioner>) -> Result<Arc<dyn Preconditioner>> {
        match problem.operator() {
            Operator::Reduced { mass_factor, .. } => Ok(Arc::new(Self::new(inner, mass_factor.clone())?)),
            _ => Ok(inner),
        }
    }
}

impl Preconditioner for HattedPreconditioner {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        self.mass_factor.mul_lt(&self.inner.apply_inv(&self.mass_factor.mul_l(v)))
    }
    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.mass_factor.solve_l(&self.inner.apply_fwd(&self.mass_factor.solve_lt(v))?))
    }
    fn fwd_mode(&self) -> FwdMode {
        self.inner.fwd_mode()
    }
    fn label(&self) -> String {
        self.inner.label()
    }
}

/// `z = B v` from `B⁻¹` alone: PCG on `B⁻¹ z = v` preconditioned by `A`.
pub fn apply_fwd_iterative(p: &dyn Preconditioner, v: &[f64], a: &dyn LinearOperator, tol: f64) -> Result<Vec<f64>> {
    let n = p.dim();
    crate::linalg::check_dim(n, v.len())?;
    let maxit = (10 * n).max(200);
    Ok(pcg(&InvOp(p), Some(a), v, tol, maxit, None)?.solution)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ProbeReport {
    /// Largest `|⟨B⁻¹u, v⟩ − ⟨u, B⁻¹v⟩| / (‖B⁻¹u‖‖v‖ + ‖u‖‖B⁻¹v‖)`.
    pub max_asymmetry: f64,
    /// Smallest `vᵀB⁻¹v / (‖v‖‖B⁻¹v‖)`.
    pub min_positivity: f64,
}

impl ProbeReport {
    pub fn is_spd(&self, tol: f64) -> bool {
        self.max_asymmetry <= tol && self.min_positivity > 0.0
    }
}

/// Spot-checks symmetry and positivity of `B⁻¹` on random probe pairs.
pub fn spd_probe(p: &dyn Preconditioner, probes: usize, seed: u64) -> ProbeReport {
    let mut rng = Rng::new(seed);
    let n = p.dim();
    let mut max_asymmetry = 0.0f64;
    let mut min_positivity = f64::INFINITY;
    for _ in 0..probes {
        let u = rng.gaussian_vector(n);
        let v = rng.gaussian_vector(n);
        let pu = p.apply_inv(&u);
        let pv = p.apply_inv(&v);
        let scale = norm(&pu) * norm(&v) + norm(&u) * norm(&pv);
        max_asymmetry = max_asymmetry.max((dot(&pu, &v) - dot(&u, &pv)).abs() / scale);
        min_positivity = min_positivity.min(dot(&v, &pv) / (norm(&v) * norm(&pv)));
    }
    ProbeReport { max_asymmetry, min_positivity }
}
