//! Randomized check of the inequalities behind the convergence theory on
//! small dense instances.

use serde::{Deserialize, Serialize};

use super::{a_x_with, gamma_x, kappa_nu, mu_x, KappaOptions, RateContext};
use crate::geometry::{dist_b_with, IterateState};
use crate::linalg::{axpy, cholesky, dense_sym_eig, dot, DenseSym, Precision, Rng};
use crate::precond::{make_mp_cholesky, DensePreconditioner, FwdOp, InvOp};
use crate::problems::random_spd;
use crate::solvers::{rsd_solve, SolveOptions, StepPolicy};
use crate::{Error, Result};

pub const SLACK: f64 = 1e-10;

pub const PROPERTY_NAMES: [&str; 7] = [
    "i: smoothness",
    "ii: quadratic growth",
    "iii: weak quasi-convexity",
    "iv: weak quasi-strong convexity",
    "v: local inner product",
    "vi: chi <= 1",
    "vii: contraction",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InstanceKind {
    Identity,
    RandomSpd,
    MpChol,
}

impl InstanceKind {
    pub const ALL: [InstanceKind; 3] = [InstanceKind::Identity, InstanceKind::RandomSpd, InstanceKind::MpChol];

    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Identity => "identity",
            InstanceKind::RandomSpd => "random-spd",
            InstanceKind::MpChol => "mp-chol",
        }
    }
}

/// Dense pair `(A, B)`.
#[derive(Debug, Clone)]
pub struct ValidationInstance {
    pub a: DenseSym,
    pub b: DenseSym,
    pub kind: InstanceKind,
    pub seed: u64,
}

impl ValidationInstance {
    pub fn new(a: DenseSym, b: DenseSym, kind: InstanceKind, seed: u64) -> Result<Self> {
        crate::linalg::check_dim(a.n(), b.n())?;
        Ok(Self { a, b, kind, seed })
    }

    /// Random instance of size `n`.
    ///
    /// `RandomSpd` uses `B = L C Lᵀ` with `A = LLᵀ` and `C` random SPD with
    /// condition 4; `MpChol` uses the product of the binary32 Cholesky factor
    /// of an ill-conditioned `A`.
    pub fn generate(kind: InstanceKind, n: usize, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidArgument("validation instances need n >= 2".into()));
        }
        let mut rng = Rng::new(seed);
        match kind {
            InstanceKind::Identity => {
                let a = random_spd(n, 100.0, &mut rng)?;
                Self::new(a, DenseSym::identity(n), kind, seed)
            }
            InstanceKind::RandomSpd => {
                let a = random_spd(n, 100.0, &mut rng)?;
                let c = random_spd(n, 4.0, &mut rng)?;
                let f = cholesky(&a, Precision::Binary64)?;
                let mut l = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..=i {
                        l[i * n + j] = f.lower(i, j);
                    }
                }
                let b = c.congruence(&l);
                Self::new(a, b, kind, seed)
            }
            InstanceKind::MpChol => {
                let a = random_spd(n, 1e6, &mut rng)?;
                let b = make_mp_cholesky(&a)?.factor().to_dense_llt();
                Self::new(a, b, kind, seed)
            }
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn label(&self) -> String {
        format!("{}:n={},seed={}", self.kind.name(), self.n(), self.seed)
    }
}

/// Deliberate defects for negative controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    #[default]
    None,
    /// `a(x)` evaluated with `cos dist + cos φ` in place of the margin.
    FlipSignInA,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PropertyStats {
    pub name: String,
    pub checked: usize,
    pub violations: usize,
    /// Smallest `rhs_allowed − lhs` seen; negative means violated.
    pub worst_margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Violation {
    pub property: String,
    pub sample: usize,
    pub detail: String,
    pub counterexample: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PropertyReport {
    pub instance: String,
    pub samples: usize,
    pub stats: Vec<PropertyStats>,
    pub first_violation: Option<Violation>,
    /// (i) with `2γ(x)` in place of `γ(x)`; informational, never counted.
    pub smoothness_2gamma: PropertyStats,
}

impl PropertyReport {
    fn new(instance: String, samples: usize) -> Self {
        let stats = PROPERTY_NAMES
            .iter()
            .map(|n| PropertyStats { name: (*n).into(), worst_margin: f64::INFINITY, ..Default::default() })
            .collect();
        let smoothness_2gamma =
            PropertyStats { name: "i with 2 gamma".into(), worst_margin: f64::INFINITY, ..Default::default() };
        Self { instance, samples, stats, first_violation: None, smoothness_2gamma }
    }

    pub fn violations(&self) -> usize {
        self.stats.iter().map(|s| s.violations).sum()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0
    }

    /// `margin ≥ −SLACK` is a pass.
    fn record(&mut self, k: usize, sample: usize, margin: f64, detail: impl FnOnce() -> String, u: &[f64]) {
        let s = &mut self.stats[k];
        s.checked += 1;
        s.worst_margin = s.worst_margin.min(margin);
        if margin < -SLACK || margin.is_nan() {
            s.violations += 1;
            if self.first_violation.is_none() {
                self.first_violation = Some(Violation {
                    property: PROPERTY_NAMES[k].into(),
                    sample,
                    detail: detail(),
                    counterexample: u.to_vec(),
                });
            }
        }
    }

    pub fn into_result(self) -> Result<Self> {
        match self.first_violation {
            Some(v) => Err(Error::PropertyViolation {
                property: v.property,
                sample: v.sample,
                detail: v.detail,
                counterexample: v.counterexample,
            }),
            None => Ok(self),
        }
    }
}

/// `u` with `‖u‖_B = 1` at B-angle `theta` from `u*` in a random direction.
fn in_basin_sample(ctx: &RateContext, b: &FwdOp<'_>, theta: f64, rng: &mut Rng) -> Vec<f64> {
    use crate::linalg::LinearOperator;
    let n = ctx.u_star.len();
    loop {
        let mut w = rng.gaussian_vector(n);
        let alpha = dot(&w, &ctx.w_star) / (ctx.norm_b * ctx.norm_b);
        axpy(-alpha, &ctx.u_star, &mut w);
        let wb = dot(&w, &b.apply(&w)).sqrt();
        if wb > 0.0 {
            let (s, c) = theta.sin_cos();
            return ctx.u_star.iter().zip(&w).map(|(us, wi)| c * us / ctx.norm_b + s * wi / wb).collect();
        }
    }
}

/// Checks inequalities (i)–(vii) at `n_samples` random points and as many
/// in-basin points, plus a short TheoryLocal run.
pub fn validate_properties(
    instance: &ValidationInstance,
    n_samples: usize,
    seed: u64,
    fault: Fault,
) -> Result<PropertyReport> {
    use crate::linalg::LinearOperator;
    let a = &instance.a;
    let precond = DensePreconditioner::new(instance.b.clone())?;
    let fwd = FwdOp::new(&precond).expect("dense preconditioners apply B exactly");
    let binv = InvOp(&precond);
    let eig = dense_sym_eig(a)?;
    let n = a.n();
    let (l1, l2, ln) = (eig.values[0], eig.values[1], eig.values[n - 1]);
    if l2 - l1 <= 1e-12 * ln {
        return Err(Error::DegenerateSmallestEigenvalue { lambda1: l1, lambda2: l2 });
    }
    let (nu_min, nu_max, _) = kappa_nu(a, &precond, KappaOptions::default())?;
    let ctx = RateContext::from_parts(a, &precond, l1, l2, ln, eig.vectors[0].clone(), nu_min, nu_max)?;
    let phi = ctx.phi();
    let f_star = ctx.f_star();
    let ratio = ctx.norm_binv.powi(2) / ctx.norm_u.powi(2);
    let mut report = PropertyReport::new(instance.label(), n_samples);
    let mut rng = Rng::new(seed);

    for s in 0..2 * n_samples {
        let in_basin = s % 2 == 1;
        let mut u = if in_basin {
            in_basin_sample(&ctx, &fwd, phi * rng.uniform(), &mut rng)
        } else {
            rng.gaussian_vector(n)
        };
        let bn = dot(&u, &fwd.apply(&u)).sqrt();
        u.iter_mut().for_each(|x| *x /= bn);
        let st = IterateState::new(u, a, &binv, 1.0)?;
        let u = &st.u;
        let dist = dist_b_with(u, &ctx.u_star, &ctx.w_star, &fwd)?;
        let cos_dist = dist.cos();
        let gap_f = st.f - f_star;
        let gamma = gamma_x(&st, &ctx);
        let mu = mu_x(&st, &ctx);

        let rhs = st.g2 / (2.0 * gamma);
        report.record(0, s, gap_f - rhs, || format!("f-f* = {gap_f:e} < |grad|^2/(2 gamma) = {rhs:e}"), u);
        let m = gap_f - 0.5 * rhs;
        let c2 = &mut report.smoothness_2gamma;
        c2.checked += 1;
        c2.worst_margin = c2.worst_margin.min(m);
        c2.violations += usize::from(m < -SLACK);
        let rhs = 0.5 * mu * dist * dist;
        report.record(1, s, gap_f - rhs, || format!("f-f* = {gap_f:e} < mu dist^2/2 = {rhs:e}"), u);

        if dist < phi {
            let a_val = match fault {
                Fault::None => a_x_with(&st, &ctx, cos_dist),
                Fault::FlipSignInA => ctx.lambda1 * ratio * (cos_dist + ctx.cos_phi) / st.x_energy(),
            };
            // ⟨grad f, −log_x x*⟩ = −(θ/sin θ)·c·sgn·rᵀu*/‖u*‖_B, c = 2uᵀu/(uᵀAu)²
            let sgn = dot(u, &ctx.w_star).signum();
            let c = 2.0 * st.uu / (st.uau * st.uau);
            let sinc = if dist > 0.0 { dist / dist.sin() } else { 1.0 };
            let inner = -sinc * c * sgn * dot(&st.r, &ctx.u_star) / ctx.norm_b;
            let rhs = 2.0 * a_val * gap_f;
            report.record(2, s, inner - rhs, || format!("<grad,-log> = {inner:e} < 2a(f-f*) = {rhs:e}"), u);
            let bound = inner / a_val - 0.5 * mu * dist * dist;
            report.record(3, s, bound - gap_f, || format!("f-f* = {gap_f:e} > <grad,-log>/a - mu dist^2/2 = {bound:e}"), u);
            let lhs = sgn * dot(u, &ctx.u_star) / ctx.norm_b;
            let rhs = ratio * (cos_dist - ctx.cos_phi);
            report.record(4, s, lhs - rhs, || format!("x'B^-1 x* = {lhs:e} < {rhs:e}"), u);
        }
    }

    let omk = 1.0 - 1.0 / ctx.kappa();
    let cos2 = ctx.cos_phi * ctx.cos_phi;
    report.record(5, 0, omk - cos2, || format!("cos^2 phi = {cos2:e} > 1 - 1/kappa = {omk:e}"), &ctx.u_star);

    // (vii) from a start at 0.9 φ
    let u0 = in_basin_sample(&ctx, &fwd, 0.9 * phi, &mut rng);
    let opts = SolveOptions { maxit: 20, tol: 1e-14, ..Default::default() };
    let run = rsd_solve(a, &precond, &u0, StepPolicy::TheoryLocal, Some(&ctx), &opts)?;
    for w in run.trace.records.windows(2) {
        let (d0, d1) = (w[0].dist_b.unwrap_or(f64::NAN), w[1].dist_b.unwrap_or(f64::NAN));
        let xi = w[0].xi.unwrap_or(f64::NAN);
        let rhs = (1.0 - xi) * d0 * d0;
        report.record(6, w[0].t, rhs - d1 * d1, || format!("dist^2 = {:e} > (1-xi) dist^2 = {rhs:e}", d1 * d1), &u0);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::UnitVector;

    fn all_but_smoothness_hold(r: &PropertyReport) {
        for s in &r.stats[1..] {
            assert_eq!(s.violations, 0, "{s:?}");
        }
        assert_eq!(r.smoothness_2gamma.violations, 0);
    }

    #[test]
    fn diagonal_unpreconditioned() {
        let inst =
            ValidationInstance::new(DenseSym::diag(&[1.0, 2.0, 4.0]), DenseSym::identity(3), InstanceKind::Identity, 0)
                .unwrap();
        let r = validate_properties(&inst, 500, 1, Fault::None).unwrap();
        assert!(r.stats.iter().all(|s| s.checked > 0));
        all_but_smoothness_hold(&r);
    }

    #[test]
    fn smoothness_counterexample() {
        // f − f* = 0.19413 but |grad f|²/(2γ) = 0.20416 here
        let a = DenseSym::diag(&[1.0, 2.0, 4.0]);
        let b = DenseSym::identity(3);
        let inst = ValidationInstance::new(a.clone(), b, InstanceKind::Identity, 0).unwrap();
        let r = validate_properties(&inst, 500, 1, Fault::None).unwrap();
        let v = r.first_violation.unwrap();
        assert_eq!(v.property, PROPERTY_NAMES[0]);
        let x = UnitVector::new(vec![0.9450935265078122, 0.19937397540091245, -0.25893675692312157]).unwrap();
        let st = IterateState::new(x.into_vec(), &a, &crate::linalg::IdentityOperator(3), 1.0).unwrap();
        let gamma = 4.0 * 0.75 / st.x_energy();
        assert!(st.f + 1.0 < st.g2 / (2.0 * gamma));
        assert!(st.f + 1.0 >= st.g2 / (4.0 * gamma));
    }

    #[test]
    fn random_pair() {
        let inst = ValidationInstance::generate(InstanceKind::RandomSpd, 12, 9).unwrap();
        let r = validate_properties(&inst, 500, 9, Fault::None).unwrap();
        all_but_smoothness_hold(&r);
    }

    #[test]
    fn fault_is_caught_at_iii() {
        let inst = ValidationInstance::generate(InstanceKind::RandomSpd, 12, 9).unwrap();
        let r = validate_properties(&inst, 500, 9, Fault::FlipSignInA).unwrap();
        assert!(r.stats[2].violations > 0);
        let err = r.into_result().unwrap_err();
        assert!(matches!(err, Error::PropertyViolation { .. }));
    }
}
