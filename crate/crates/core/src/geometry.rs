//! Sphere geometry and the u-space identities for `x = B^{1/2}u / ‖B^{1/2}u‖`.

use crate::linalg::{axpy, dot, norm, LinearOperator};
use crate::{Error, Result};

/// A point on the unit sphere.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Normalizes `v` onto the sphere.
    pub fn new(mut v: Vec<f64>) -> Result<Self> {
        let nv = norm(&v);
        if nv == 0.0 || !nv.is_finite() {
            return Err(Error::ZeroVector);
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        Ok(Self(v))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for UnitVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

fn nonzero(u: &[f64]) -> Result<f64> {
    let uu = dot(u, u);
    if uu == 0.0 {
        Err(Error::ZeroVector)
    } else {
        Ok(uu)
    }
}

pub fn rayleigh(u: &[f64], a: &dyn LinearOperator) -> Result<f64> {
    let uu = nonzero(u)?;
    Ok(dot(u, &a.apply(u)) / uu)
}

/// `f = −uᵀu / uᵀAu`.
pub fn f_value(u: &[f64], a: &dyn LinearOperator) -> Result<f64> {
    Ok(-1.0 / rayleigh(u, a)?)
}

/// The iterate `u` together with the quantities every step needs.
#[derive(Debug, Clone)]
pub struct IterateState {
    pub u: Vec<f64>,
    pub au: Vec<f64>,
    pub uu: f64,
    pub uau: f64,
    pub lambda: f64,
    pub r: Vec<f64>,
    pub binv_r: Vec<f64>,
    /// `rᵀB⁻¹r`
    pub rbr: f64,
    pub f: f64,
    /// `‖u‖²_B`; 1 for a properly normalized iterate.
    pub bnorm2: f64,
    pub g2: f64,
}

impl IterateState {
    /// Builds the state for `u`, whose squared B-norm the caller supplies.
    pub fn new(u: Vec<f64>, a: &dyn LinearOperator, b_inv: &dyn LinearOperator, bnorm2: f64) -> Result<Self> {
        let uu = nonzero(&u)?;
        let au = a.apply(&u);
        let uau = dot(&u, &au);
        let lambda = uau / uu;
        let mut r = au.clone();
        axpy(-lambda, &u, &mut r);
        let binv_r = b_inv.apply(&r);
        let rbr = dot(&r, &binv_r).max(0.0);
        let mut s = Self { u, au, uu, uau, lambda, r, binv_r, rbr, f: -uu / uau, bnorm2, g2: 0.0 };
        s.g2 = grad_norm_sq(&s);
        Ok(s)
    }

    pub fn residual_norm(&self) -> f64 {
        norm(&self.r)
    }

    /// `‖r‖ / (λ(u)‖u‖)`
    pub fn relative_residual(&self) -> f64 {
        self.residual_norm() / (self.lambda.abs() * self.uu.sqrt())
    }

    /// `‖A^{1/2}B^{-1/2}x‖²` for the unit vector `x` represented by `u`.
    pub fn x_energy(&self) -> f64 {
        self.uau / self.bnorm2
    }
}

/// `‖grad f(x)‖² = ‖u‖²_B · (2uᵀu/(uᵀAu)²)² · rᵀB⁻¹r`.
pub fn grad_norm_sq(state: &IterateState) -> f64 {
    let c = 2.0 * state.uu / (state.uau * state.uau);
    state.bnorm2 * c * c * state.rbr
}

/// `dist_B(u, v)` given `Bv` and a way to apply B, evaluated through the
/// B-orthogonal component of `u` so that small angles keep full accuracy.
pub fn dist_b_with(u: &[f64], v: &[f64], bv: &[f64], b: &dyn LinearOperator) -> Result<f64> {
    nonzero(u)?;
    let vbv = dot(v, bv);
    if vbv <= 0.0 {
        return Err(Error::ZeroVector);
    }
    let alpha = dot(u, bv) / vbv;
    let mut w = u.to_vec();
    axpy(-alpha, v, &mut w);
    let wbw = dot(&w, &b.apply(&w)).max(0.0);
    Ok(wbw.sqrt().atan2(alpha.abs() * vbv.sqrt()))
}

pub fn dist_b(u: &[f64], v: &[f64], b: &dyn LinearOperator) -> Result<f64> {
    nonzero(v)?;
    let bv = b.apply(v);
    dist_b_with(u, v, &bv, b)
}

/// `dist_B` from cached B-norms and `Bv` alone; accurate only to about
/// `sqrt(eps)` near zero.
pub fn dist_b_cached(u: &[f64], u_bnorm: f64, v_bnorm: f64, bv: &[f64]) -> f64 {
    let c = (dot(u, bv).abs() / (u_bnorm * v_bnorm)).clamp(-1.0, 1.0);
    c.acos()
}

pub fn sphere_exp(x: &UnitVector, t: &[f64]) -> Result<UnitVector> {
    let nt = norm(t);
    if dot(x.as_slice(), t).abs() > 1e-10 * nt {
        return Err(Error::NotTangent);
    }
    if nt == 0.0 {
        return Ok(x.clone());
    }
    let (s, c) = nt.sin_cos();
    let y: Vec<f64> = x.as_slice().iter().zip(t).map(|(xi, ti)| c * xi + s * ti / nt).collect();
    UnitVector::new(y)
}

pub fn sphere_log(x: &UnitVector, y: &UnitVector) -> Result<Vec<f64>> {
    let xs = x.as_slice();
    let c = dot(xs, y.as_slice());
    let mut p = y.as_slice().to_vec();
    axpy(-c, xs, &mut p);
    let np = norm(&p);
    if np < 1e-14 {
        return if c > 0.0 { Ok(vec![0.0; xs.len()]) } else { Err(Error::AntipodalOrEqual) };
    }
    let d = np.atan2(c);
    for v in p.iter_mut() {
        *v *= d / np;
    }
    Ok(p)
}

/// Great-circle distance, `2·atan2(‖x−y‖, ‖x+y‖)`, which equals
/// `arccos(xᵀy)` without its loss of accuracy near 0 and π.
pub fn sphere_dist(x: &UnitVector, y: &UnitVector) -> f64 {
    let (mut dm, mut dp) = (0.0, 0.0);
    for (a, b) in x.as_slice().iter().zip(y.as_slice()) {
        dm += (a - b) * (a - b);
        dp += (a + b) * (a + b);
    }
    2.0 * dm.sqrt().atan2(dp.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseSym, IdentityOperator};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn uv(v: &[f64]) -> UnitVector {
        UnitVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rayleigh_examples() {
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        assert_eq!(rayleigh(&[1.0, 0.0, 0.0], &a).unwrap(), 1.0);
        assert!((rayleigh(&[1.0, 1.0, 1.0], &a).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        assert!((rayleigh(&[-3.0, -3.0, -3.0], &a).unwrap() - 7.0 / 3.0).abs() < 1e-15);
        assert!((f_value(&[1.0, 1.0, 1.0], &a).unwrap() + 3.0 / 7.0).abs() < 1e-15);
        assert!(matches!(rayleigh(&[0.0; 3], &a), Err(Error::ZeroVector)));
    }

    #[test]
    fn gradient_vanishes_at_eigenvector() {
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let s = IterateState::new(vec![0.0, 1.0, 0.0], &a, &IdentityOperator(3), 1.0).unwrap();
        assert_eq!(s.g2, 0.0);
    }

    #[test]
    fn dist_b_identity() {
        let b = IdentityOperator(2);
        assert_eq!(dist_b(&[1.0, 2.0], &[1.0, 2.0], &b).unwrap(), 0.0);
        assert!((dist_b(&[1.0, 0.0], &[0.0, 3.0], &b).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(dist_b(&[1.0, 0.0], &[-1.0, 0.1], &b).unwrap() < FRAC_PI_2);
    }

    #[test]
    fn exp_and_log_examples() {
        let e1 = uv(&[1.0, 0.0]);
        assert_eq!(sphere_exp(&e1, &[0.0, 0.0]).unwrap(), e1);
        let y = sphere_exp(&e1, &[0.0, FRAC_PI_2]).unwrap();
        assert!(y.as_slice()[0].abs() < 1e-15 && (y.as_slice()[1] - 1.0).abs() < 1e-15);
        assert!(matches!(sphere_exp(&e1, &[1.0, 0.0]), Err(Error::NotTangent)));
        let l = sphere_log(&e1, &uv(&[1.0, 1.0])).unwrap();
        assert!(l[0].abs() < 1e-15 && (l[1] - FRAC_PI_4).abs() < 1e-15);
        assert_eq!(sphere_log(&e1, &e1).unwrap(), vec![0.0, 0.0]);
        assert!(matches!(sphere_log(&e1, &uv(&[-1.0, 0.0])), Err(Error::AntipodalOrEqual)));
    }

    #[test]
    fn dist_examples() {
        let e1 = uv(&[1.0, 0.0]);
        assert_eq!(sphere_dist(&e1, &e1), 0.0);
        assert!((sphere_dist(&e1, &uv(&[0.0, 1.0])) - FRAC_PI_2).abs() < 1e-15);
        assert!((sphere_dist(&e1, &uv(&[-1.0, 0.0])) - PI).abs() < 1e-15);
    }
}
