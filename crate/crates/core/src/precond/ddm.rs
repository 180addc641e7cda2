//! Two-level overlapping additive Schwarz.

use std::sync::Arc;

use super::{apply_fwd_iterative, FwdMode, Preconditioner, DEFAULT_FWD_TOL};
use crate::linalg::{CsrMatrix, SkylineCholesky, SparseSym};
use crate::par::{map_range, map_slice, Execution};
use crate::problems::MeshHierarchy;
use crate::{Error, Result};

struct Coarse {
    prolongation: CsrMatrix,
    factor: SkylineCholesky,
}

struct Local {
    index: Vec<usize>,
    factor: SkylineCholesky,
}

/// `B⁻¹ = P A_H⁻¹ Pᵀ + Σ_j R_jᵀ A_j⁻¹ R_j`.
pub struct DdmPreconditioner {
    a: Arc<SparseSym>,
    coarse: Option<Coarse>,
    locals: Vec<Local>,
    exec: Execution,
    fwd_tol: f64,
    label: String,
}

impl DdmPreconditioner {
    /// Builds the preconditioner from explicit subdomain index sets and an
    /// optional prolongation; the coarse matrix defaults to `PᵀAP`.
    pub fn new(
        a: Arc<SparseSym>,
        subdomains: &[Vec<usize>],
        prolongation: Option<CsrMatrix>,
        coarse_matrix: Option<SparseSym>,
        exec: Execution,
    ) -> Result<Self> {
        let n = a.n();
        for (j, s) in subdomains.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::EmptySubdomain(j));
            }
            if let Some(&bad) = s.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidArgument(format!("subdomain {j} refers to node {bad} >= {n}")));
            }
        }
        let factors = map_slice(exec, subdomains, |s| SkylineCholesky::factor(&a.principal(s)));
        let mut locals = Vec::with_capacity(subdomains.len());
        for (s, f) in subdomains.iter().zip(factors) {
            locals.push(Local { index: s.clone(), factor: f? });
        }
        let coarse = match prolongation {
            Some(p) => {
                crate::linalg::check_dim(n, p.rows())?;
                let ac = match coarse_matrix {
                    Some(m) => m,
                    None => a.galerkin(&p)?,
                };
                crate::linalg::check_dim(p.cols(), ac.n())?;
                Some(Coarse { factor: SkylineCholesky::factor(&ac)?, prolongation: p })
            }
            None => None,
        };
        Ok(Self { a, coarse, locals, exec, fwd_tol: DEFAULT_FWD_TOL, label: "ddm".into() })
    }

    pub fn with_fwd_tol(mut self, tol: f64) -> Self {
        self.fwd_tol = tol;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn n_subdomains(&self) -> usize {
        self.locals.len()
    }

    pub fn has_coarse(&self) -> bool {
        self.coarse.is_some()
    }

    /// The coarse correction and each local correction, separately.
    pub fn contributions(&self, v: &[f64]) -> (Option<Vec<f64>>, Vec<Vec<f64>>) {
        let coarse = self.coarse.as_ref().map(|c| {
            let vc = c.prolongation.matvec_t(v);
            c.prolongation.matvec(&c.factor.solve(&vc))
        });
        let locals = map_range(self.exec, self.locals.len(), |j| {
            let loc = &self.locals[j];
            let vj: Vec<f64> = loc.index.iter().map(|&i| v[i]).collect();
            loc.factor.solve(&vj)
        });
        (coarse, locals)
    }
}

/// Two-level DDM on a mesh hierarchy; `a_coarse` defaults to the Galerkin product.
pub fn make_ddm(
    hierarchy: &MeshHierarchy,
    a_fine: Arc<SparseSym>,
    a_coarse: Option<SparseSym>,
    exec: Execution,
) -> Result<DdmPreconditioner> {
    crate::linalg::check_dim(hierarchy.n_fine(), a_fine.n())?;
    let label = format!("ddm:H=2^-{},overlap={}", hierarchy.coarse_cells.trailing_zeros(), hierarchy.overlap_ratio);
    Ok(DdmPreconditioner::new(a_fine, &hierarchy.subdomains, hierarchy.prolongation.clone(), a_coarse, exec)?
        .with_label(label))
}

impl Preconditioner for DdmPreconditioner {
    fn dim(&self) -> usize {
        self.a.n()
    }

    fn apply_inv(&self, v: &[f64]) -> Vec<f64> {
        let (coarse, locals) = self.contributions(v);
        let mut y = coarse.unwrap_or_else(|| vec![0.0; v.len()]);
        // fixed ascending order keeps the sum bit-reproducible
        for (loc, yj) in self.locals.iter().zip(&locals) {
            for (&i, x) in loc.index.iter().zip(yj) {
                y[i] += x;
            }
        }
        y
    }

    fn apply_fwd(&self, v: &[f64]) -> Result<Vec<f64>> {
        apply_fwd_iterative(self, v, self.a.as_ref(), self.fwd_tol)
    }

    fn fwd_mode(&self) -> FwdMode {
        FwdMode::Iterative { tol: self.fwd_tol }
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
