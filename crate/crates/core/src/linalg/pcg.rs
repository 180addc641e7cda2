use super::{axpy, check_dim, dot, norm, LinearOperator};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct PcgOutcome {
    pub solution: Vec<f64>,
    pub iterations: usize,
    /// True relative residual `‖rhs − A x‖ / ‖rhs‖` of the returned solution.
    pub relative_residual: f64,
}

/// Preconditioned conjugate gradients for `A x = rhs`.
///
/// `m_inv` applies the inverse of the preconditioner; `None` means plain CG.
/// Stops once the true Euclidean residual satisfies `‖rhs − A x‖ ≤ tol·‖rhs‖`.
pub fn pcg(
    a: &dyn LinearOperator,
    m_inv: Option<&dyn LinearOperator>,
    rhs: &[f64],
    tol: f64,
    maxit: usize,
    x0: Option<&[f64]>,
) -> Result<PcgOutcome> {
    let n = a.dim();
    check_dim(n, rhs.len())?;
    if let Some(m) = m_inv {
        check_dim(n, m.dim())?;
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("pcg tolerance must be positive".into()));
    }
    let bnorm = norm(rhs);
    if bnorm == 0.0 {
        return Ok(PcgOutcome { solution: vec![0.0; n], iterations: 0, relative_residual: 0.0 });
    }
    let precondition = |r: &[f64]| match m_inv {
        Some(m) => m.apply(r),
        None => r.to_vec(),
    };

    let mut x = match x0 {
        Some(x0) => {
            check_dim(n, x0.len())?;
            x0.to_vec()
        }
        None => vec![0.0; n],
    };
    let mut r = if x0.is_some() {
        let ax = a.apply(&x);
        rhs.iter().zip(&ax).map(|(b, v)| b - v).collect()
    } else {
        rhs.to_vec()
    };
    let mut rnorm = norm(&r);
    if rnorm <= tol * bnorm {
        return Ok(PcgOutcome { solution: x, iterations: 0, relative_residual: rnorm / bnorm });
    }
    let mut best = (rnorm, x.clone());

    let mut z = precondition(&r);
    let mut rz = dot(&r, &z);
    if !(rz > 0.0) {
        return Err(Error::BreakdownNonSpd { iteration: 0 });
    }
    let mut p = z.clone();
    for it in 1..=maxit {
        let ap = a.apply(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::BreakdownNonSpd { iteration: it });
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        rnorm = norm(&r);
        if rnorm <= tol * bnorm {
            // confirm with the true residual before accepting
            let ax = a.apply(&x);
            let true_r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            let true_norm = norm(&true_r);
            if true_norm <= tol * bnorm {
                return Ok(PcgOutcome { solution: x, iterations: it, relative_residual: true_norm / bnorm });
            }
            r = true_r;
            rnorm = true_norm;
        }
        if rnorm < best.0 {
            best = (rnorm, x.clone());
        }
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        if !(rz_new > 0.0) {
            return Err(Error::BreakdownNonSpd { iteration: it });
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::MaxIterations { iterations: maxit, residual: best.0 / bnorm, best: Some(best.1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseSym, IdentityOperator};

    #[test]
    fn identity_one_iteration() {
        let a = IdentityOperator(4);
        let v = [1.0, -2.0, 3.0, 0.5];
        let out = pcg(&a, Some(&IdentityOperator(4)), &v, 1e-12, 10, None).unwrap();
        assert_eq!(out.iterations, 1);
        assert_eq!(out.solution, v.to_vec());
    }

    #[test]
    fn diagonal_terminates_in_n_steps() {
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let out = pcg(&a, None, &[1.0, 1.0, 1.0], 1e-12, 10, None).unwrap();
        assert!(out.iterations <= 3);
        for (x, e) in out.solution.iter().zip([1.0, 0.5, 0.25]) {
            assert!((x - e).abs() < 1e-12);
        }
    }

    #[test]
    fn max_iterations_carries_best() {
        let a = DenseSym::diag(&[1.0, 10.0, 100.0, 1000.0]);
        match pcg(&a, None, &[1.0; 4], 1e-14, 1, None) {
            Err(Error::MaxIterations { best: Some(b), .. }) => assert_eq!(b.len(), 4),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn indefinite_breaks_down() {
        let a = DenseSym::diag(&[1.0, -1.0]);
        assert!(matches!(pcg(&a, None, &[0.0, 1.0], 1e-10, 10, None), Err(Error::BreakdownNonSpd { .. })));
    }
}
