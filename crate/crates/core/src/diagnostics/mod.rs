//! Distortion angle, spectral equivalence and the rate constants of the
//! convergence analysis, plus checks of the starting-vector conditions.

mod initial;
pub mod validate;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use initial::{check_initial, success_probability, InitialCheck, Sampler, SuccessCounts, C_MARGIN_GRID};
pub use validate::{validate_properties, Fault, PropertyReport, PropertyStats, ValidationInstance};

use crate::geometry::IterateState;
use crate::linalg::{cholesky, dense_sym_eig, dot, lanczos_extremal, DenseSym, FnOperator, GramInner, LinearOperator, Precision};
use crate::precond::{epsilon_l, Preconditioner};
use crate::problems::EigenProblem;
use crate::Result;

/// Above this dimension `κ_ν` comes from Lanczos rather than a dense eigensolve.
pub const DENSE_KAPPA_CAP: usize = 200;

#[derive(Debug, Clone, Copy)]
pub struct KappaOptions {
    pub tol: f64,
    pub maxit: usize,
    pub dense_cap: usize,
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self { tol: 1e-10, maxit: 1000, dense_cap: DENSE_KAPPA_CAP }
    }
}

fn dense_of(op: &dyn Fn(&[f64]) -> Vec<f64>, n: usize) -> DenseSym {
    let cols: Vec<Vec<f64>> = (0..n).map(|j| op(&crate::linalg::unit(n, j))).collect();
    DenseSym::from_fn(n, |i, j| 0.5 * (cols[j][i] + cols[i][j]))
}

/// Extremal eigenvalues of `B⁻¹A` and their ratio.
pub fn kappa_nu(a: &dyn LinearOperator, precond: &dyn Preconditioner, opts: KappaOptions) -> Result<(f64, f64, f64)> {
    let n = a.dim();
    crate::linalg::check_dim(n, precond.dim())?;
    let (lo, hi) = if n <= opts.dense_cap {
        // eigenvalues of B⁻¹A are those of Lᵀ B⁻¹ L with A = L Lᵀ
        let ad = dense_of(&|x| a.apply(x), n);
        let binv = dense_of(&|x| precond.apply_inv(x), n);
        let f = cholesky(&ad, Precision::Binary64)?;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                l[i * n + j] = f.lower(i, j);
            }
        }
        let e = dense_sym_eig(&binv.congruence(&l))?;
        (e.values[0], e.values[n - 1])
    } else {
        let t = FnOperator::new(n, |x: &[f64]| precond.apply_inv(&a.apply(x)));
        lanczos_extremal(&t, &GramInner(a), opts.tol, opts.maxit)?
    };
    Ok((lo, hi, hi / lo))
}

/// `(sin φ, cos φ)` with `sin φ = ‖u‖²/(‖u‖_B‖u‖_{B⁻¹})`.
///
/// `cos φ` is evaluated from the Cauchy–Schwarz defect
/// `‖u‖²_B‖u‖²_{B⁻¹} − ‖u‖⁴ = ‖u‖²_B · v*ᵀB⁻¹v*`, with `B⁻¹v* = B⁻¹u − αu`,
/// so that it stays accurate when φ is close to π/2.
pub fn cos_phi_direct(u: &[f64], binv_u: &[f64], b_u: &[f64]) -> (f64, f64) {
    let uu = dot(u, u);
    let ubu = dot(u, b_u);
    let ubinvu = dot(u, binv_u);
    let sin = (uu / (ubu * ubinvu).sqrt()).min(1.0);
    let alpha = uu / ubu;
    let mut defect = 0.0;
    for i in 0..u.len() {
        let v = u[i] - alpha * b_u[i];
        let bv = binv_u[i] - alpha * u[i];
        defect += v * bv;
    }
    let cos2 = (defect / ubinvu).clamp(0.0, 1.0);
    (sin, cos2.sqrt())
}

/// `cos φ = sup_{vᵀu=0} vᵀB⁻¹u/(‖v‖_{B⁻¹}‖u‖_{B⁻¹})`, attained at `v* = u − (‖u‖²/‖u‖²_B)Bu`.
pub fn cos_phi_variational(u: &[f64], b_u: &[f64], b_inv: &dyn LinearOperator) -> f64 {
    let alpha = dot(u, u) / dot(u, b_u);
    let v: Vec<f64> = u.iter().zip(b_u).map(|(x, y)| x - alpha * y).collect();
    if crate::linalg::norm(&v) <= 1e-14 * crate::linalg::norm(u) {
        return 0.0;
    }
    let binv_u = b_inv.apply(u);
    let binv_v = b_inv.apply(&v);
    let num = dot(&v, &binv_u).abs();
    (num / (dot(&v, &binv_v).sqrt() * dot(u, &binv_u).sqrt())).min(1.0)
}

/// `ϑ = arcsin(‖u‖²_B/(‖Bu‖‖u‖))`.
pub fn theta_shao(u: &[f64], b_u: &[f64]) -> f64 {
    let s = dot(u, b_u) / (crate::linalg::norm(b_u) * crate::linalg::norm(u));
    s.clamp(-1.0, 1.0).asin()
}

/// Every constant attached to the pair (problem, preconditioner) at `u*`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateContext {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambdan: f64,
    pub u_star: Vec<f64>,
    /// `B u*`
    pub w_star: Vec<f64>,
    pub binv_u_star: Vec<f64>,
    pub norm_u: f64,
    pub norm_a: f64,
    pub norm_b: f64,
    pub norm_binv: f64,
    pub sin_phi: f64,
    pub cos_phi: f64,
    pub nu_min: f64,
    pub nu_max: f64,
    pub theta_shao: f64,
}

impl RateContext {
    /// Builds the context; `bounds` overrides the computed `(ν_min, ν_max)`.
    pub fn new(problem: &EigenProblem, precond: &dyn Preconditioner, bounds: Option<(f64, f64)>) -> Result<Self> {
        let r = problem.reference()?.clone();
        let (nu_min, nu_max) = match bounds {
            Some(b) => b,
            None => {
                let (lo, hi, _) = kappa_nu(problem, precond, KappaOptions::default())?;
                (lo, hi)
            }
        };
        Self::from_parts(problem, precond, r.lambda1, r.lambda2, r.lambdan, r.u_star, nu_min, nu_max)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        a: &dyn LinearOperator,
        precond: &dyn Preconditioner,
        lambda1: f64,
        lambda2: f64,
        lambdan: f64,
        u_star: Vec<f64>,
        nu_min: f64,
        nu_max: f64,
    ) -> Result<Self> {
        let w_star = precond.apply_fwd(&u_star)?;
        let binv_u_star = precond.apply_inv(&u_star);
        let (sin_phi, cos_phi) = cos_phi_direct(&u_star, &binv_u_star, &w_star);
        let au = a.apply(&u_star);
        Ok(Self {
            lambda1,
            lambda2,
            lambdan,
            norm_u: dot(&u_star, &u_star).sqrt(),
            norm_a: dot(&u_star, &au).sqrt(),
            norm_b: dot(&u_star, &w_star).sqrt(),
            norm_binv: dot(&u_star, &binv_u_star).sqrt(),
            theta_shao: theta_shao(&u_star, &w_star),
            u_star,
            w_star,
            binv_u_star,
            sin_phi,
            cos_phi,
            nu_min,
            nu_max,
        })
    }

    pub fn kappa(&self) -> f64 {
        self.nu_max / self.nu_min
    }

    pub fn phi(&self) -> f64 {
        self.sin_phi.atan2(self.cos_phi)
    }

    /// `|uᵀBu*|/(‖u‖_B‖u*‖_B)` from the cached `Bu*`.
    pub fn cos_dist(&self, u: &[f64], u_bnorm: f64) -> f64 {
        (dot(u, &self.w_star).abs() / (u_bnorm * self.norm_b)).min(1.0)
    }

    /// `f(x*) = −1/λ1`
    pub fn f_star(&self) -> f64 {
        -1.0 / self.lambda1
    }

    fn spread(&self) -> f64 {
        1.0 / self.lambda1 - 1.0 / self.lambdan
    }

    fn gap(&self) -> f64 {
        1.0 / self.lambda1 - 1.0 / self.lambda2
    }
}

/// `γ(x) = ν_max(λ1⁻¹ − λn⁻¹)/‖A^{1/2}B^{-1/2}x‖²`
pub fn gamma_x(state: &IterateState, ctx: &RateContext) -> f64 {
    ctx.nu_max * ctx.spread() / state.x_energy()
}

/// `μ(x) = 8ν_min(λ1⁻¹ − λ2⁻¹)‖u*‖_B/(π²‖A^{1/2}B^{-1/2}x‖‖u*‖_A)`
pub fn mu_x(state: &IterateState, ctx: &RateContext) -> f64 {
    8.0 * ctx.nu_min * ctx.gap() * ctx.norm_b / (PI * PI * state.x_energy().sqrt() * ctx.norm_a)
}

/// `a(x)` given `cos(dist(x, x*))`.
pub fn a_x_with(state: &IterateState, ctx: &RateContext, cos_dist: f64) -> f64 {
    ctx.lambda1 * ctx.norm_binv.powi(2) * (cos_dist - ctx.cos_phi) / (state.x_energy() * ctx.norm_u.powi(2))
}

/// `a(x) = λ1‖u*‖²_{B⁻¹}(cos dist − cos φ)/(‖A^{1/2}B^{-1/2}x‖²‖u*‖²)`
pub fn a_x(state: &IterateState, ctx: &RateContext) -> f64 {
    a_x_with(state, ctx, ctx.cos_dist(&state.u, state.bnorm2.sqrt()))
}

/// `ξ_t` for the step `η = a/γ`, in closed form.
pub fn xi_t_with(state: &IterateState, ctx: &RateContext, cos_dist: f64) -> f64 {
    let margin = cos_dist - ctx.cos_phi;
    let lead = 8.0 * ctx.lambda1.powi(2) * ctx.norm_b * ctx.norm_binv.powi(4)
        / (PI * PI * ctx.norm_u.powi(4) * ctx.norm_a);
    let s = margin.signum() * margin * margin;
    lead * s / state.x_energy().powf(1.5) * ctx.gap() / (ctx.kappa() * ctx.spread())
}

pub fn xi_t(state: &IterateState, ctx: &RateContext) -> f64 {
    xi_t_with(state, ctx, ctx.cos_dist(&state.u, state.bnorm2.sqrt()))
}

/// `ξ_∞ = 8/(π²(1+cos φ)²)·(λ1⁻¹−λ2⁻¹)/(κ_ν(λ1⁻¹−λn⁻¹))`
pub fn xi_inf(ctx: &RateContext) -> f64 {
    8.0 / (PI * PI * (1.0 + ctx.cos_phi).powi(2)) * ctx.gap() / (ctx.kappa() * ctx.spread())
}

/// `ρ_B = (κ−1)/(κ+1)`
pub fn rho_b(kappa: f64) -> f64 {
    (kappa - 1.0) / (kappa + 1.0)
}

/// `ρ = 1 − (1−ρ_B)(1−λ1/λ2)`
pub fn rho(kappa: f64, lambda1: f64, lambda2: f64) -> f64 {
    1.0 - (1.0 - rho_b(kappa)) * (1.0 - lambda1 / lambda2)
}

/// `ξ_∞` rewritten through `1 − ρ`:
/// `(1−ρ)·4/(π²(1+cos φ)²)·(κ+1)/κ·1/(1−λ1/λn)`.
pub fn xi_inf_via_rho(ctx: &RateContext) -> f64 {
    let k = ctx.kappa();
    (1.0 - rho(k, ctx.lambda1, ctx.lambda2)) * 4.0 / (PI * PI * (1.0 + ctx.cos_phi).powi(2)) * (k + 1.0) / k
        / (1.0 - ctx.lambda1 / ctx.lambdan)
}

/// Rate bound `1 − 8c²(λ1⁻¹−λ2⁻¹)/(π²κ⁴(λ1⁻¹−λn⁻¹))` for the constant step.
pub fn constant_step_rate(ctx: &RateContext, c: f64) -> f64 {
    1.0 - 8.0 * c * c * ctx.gap() / (PI * PI * ctx.kappa().powi(4) * ctx.spread())
}

/// Diagnostics bundle for one (problem, preconditioner) pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrecondQuality {
    pub nu_min: f64,
    pub nu_max: f64,
    pub kappa_nu: f64,
    pub sin_phi: f64,
    pub cos_phi: f64,
    pub cos2_phi: f64,
    pub one_minus_inv_kappa: f64,
    /// `cos²φ/(1−κ⁻¹)`; undefined when `κ = 1`.
    pub chi: Option<f64>,
    pub theta_shao: f64,
    #[serde(rename = "rho_B")]
    pub rho_b: f64,
    pub rho: f64,
    pub xi_inf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_l: Option<f64>,
}

impl PrecondQuality {
    pub fn from_context(ctx: &RateContext) -> Self {
        let k = ctx.kappa();
        let omk = 1.0 - 1.0 / k;
        let cos2 = ctx.cos_phi * ctx.cos_phi;
        Self {
            nu_min: ctx.nu_min,
            nu_max: ctx.nu_max,
            kappa_nu: k,
            sin_phi: ctx.sin_phi,
            cos_phi: ctx.cos_phi,
            cos2_phi: cos2,
            one_minus_inv_kappa: omk,
            chi: (omk > 1e-12).then(|| cos2 / omk),
            theta_shao: ctx.theta_shao,
            rho_b: rho_b(k),
            rho: rho(k, ctx.lambda1, ctx.lambda2),
            xi_inf: xi_inf(ctx),
            epsilon_l: None,
        }
    }

    pub fn with_epsilon_l(mut self, n: usize, lambda1: f64, lambdan: f64) -> Self {
        self.epsilon_l = Some(epsilon_l(n, lambda1, lambdan).0);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{DenseSym, IdentityOperator};
    use crate::precond::{make_identity, DensePreconditioner};

    fn diag_ctx(b: &dyn Preconditioner) -> RateContext {
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let (lo, hi, _) = kappa_nu(&a, b, KappaOptions::default()).unwrap();
        RateContext::from_parts(&a, b, 1.0, 2.0, 4.0, vec![1.0, 0.0, 0.0], lo, hi).unwrap()
    }

    #[test]
    fn identity_gives_right_angle() {
        let ctx = diag_ctx(&make_identity(3));
        assert_eq!((ctx.sin_phi, ctx.cos_phi), (1.0, 0.0));
        assert_eq!((ctx.nu_min, ctx.nu_max), (1.0, 4.0));
        assert!((ctx.theta_shao - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn closed_forms_at_the_minimizer() {
        let ctx = diag_ctx(&make_identity(3));
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let s = IterateState::new(vec![1.0, 0.0, 0.0], &a, &IdentityOperator(3), 1.0).unwrap();
        assert!((gamma_x(&s, &ctx) - 3.0).abs() < 1e-15);
        assert!((mu_x(&s, &ctx) - 4.0 / (PI * PI)).abs() < 1e-15);
        assert!((a_x(&s, &ctx) / gamma_x(&s, &ctx) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn xi_inf_for_exact_preconditioner() {
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let b = DensePreconditioner::new(a.clone()).unwrap();
        let ctx = diag_ctx(&b);
        assert!((ctx.kappa() - 1.0).abs() < 1e-14);
        assert!(ctx.cos_phi < 1e-15);
        assert!((xi_inf(&ctx) - 16.0 / (3.0 * PI * PI)).abs() < 1e-12);
        assert!((xi_inf(&ctx) - xi_inf_via_rho(&ctx)).abs() < 1e-12);
    }

    #[test]
    fn shao_angle_for_b_eigenvector() {
        assert!((theta_shao(&[1.0, 0.0], &[1.0, 0.0]) - PI / 2.0).abs() < 1e-15);
    }
}
