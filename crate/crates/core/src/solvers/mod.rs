//! Classical PINVIT and the Riemannian steepest-descent variant, run in u-space.

mod trace;

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

pub use trace::{Trace, TraceEvent, TraceRecord, TRACE_HEADER};

use crate::diagnostics::{a_x_with, gamma_x, mu_x, xi_t_with, RateContext};
use crate::geometry::{dist_b_with, IterateState};
use crate::linalg::{axpy, dot, norm, LinearOperator};
use crate::precond::{FwdMode, FwdOp, InvOp, Preconditioner};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepPolicy {
    /// `η_t = a(x_t)/γ(x_t)`; needs the rate context.
    TheoryLocal,
    /// `η = c/(κ²(λ1⁻¹−λn⁻¹))` with `0 < c < 1/2`.
    ConstantCor(f64),
    Fixed(f64),
}

impl StepPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepPolicy::ConstantCor(c) if !(c > 0.0 && c < 0.5) => Err(Error::InvalidC(c)),
            StepPolicy::Fixed(v) if !(v > 0.0 && v.is_finite()) => {
                Err(Error::InvalidArgument(format!("fixed step {v} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    ResidualTol,
    MaxIters,
    StagnatedStep,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Stop once `‖r‖/(λ(u)‖u‖) ≤ tol`.
    pub tol: f64,
    pub maxit: usize,
    /// Stop when λ moved by at most `1e-15·λ` over this many iterations.
    pub stagnation_window: usize,
    /// For implicit B, recompute `‖u‖_B` by a forward solve this often.
    pub renorm_every: usize,
    pub keep_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-8, maxit: 10_000, stagnation_window: 10, renorm_every: 25, keep_iterates: false }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Trace,
    /// `u_0, u_1, …` when requested.
    pub iterates: Vec<Vec<f64>>,
}

/// `η_t = a(x_t)/γ(x_t)`, defined only inside the basin `dist < φ`.
pub fn step_theory(state: &IterateState, ctx: &RateContext) -> Result<f64> {
    let cos_dist = ctx.cos_dist(&state.u, state.bnorm2.sqrt());
    if cos_dist <= ctx.cos_phi {
        return Err(Error::OutsideBasin { dist: cos_dist.acos(), phi: ctx.phi() });
    }
    Ok(a_x_with(state, ctx, cos_dist) / gamma_x(state, ctx))
}

/// `η = c/(κ²(λ1⁻¹−λn⁻¹))`
pub fn step_constant(ctx: &RateContext, c: f64) -> Result<f64> {
    if !(c > 0.0 && c < 0.5) {
        return Err(Error::InvalidC(c));
    }
    Ok(c / (ctx.kappa().powi(2) * (1.0 / ctx.lambda1 - 1.0 / ctx.lambdan)))
}

fn b_norm2(precond: &dyn Preconditioner, u: &[f64]) -> Result<f64> {
    Ok(dot(u, &precond.apply_fwd(u)?))
}

struct DistTracker<'a> {
    ctx: &'a RateContext,
    fwd: Option<FwdOp<'a>>,
}

impl DistTracker<'_> {
    fn dist(&self, u: &[f64], bnorm2: f64) -> f64 {
        match &self.fwd {
            Some(b) => dist_b_with(u, &self.ctx.u_star, &self.ctx.w_star, b).unwrap_or(f64::NAN),
            None => self.ctx.cos_dist(u, bnorm2.sqrt()).acos(),
        }
    }
}

/// Riemannian steepest descent on the sphere expressed in u-space:
/// `u ← β(u − η*_t B⁻¹r)` with `η*_t = 2 tan(η_t g) uᵀu/(g (uᵀAu)²)`.
pub fn rsd_solve(
    a: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    u0: &[f64],
    policy: StepPolicy,
    ctx: Option<&RateContext>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    policy.validate()?;
    crate::linalg::check_dim(a.dim(), u0.len())?;
    crate::linalg::check_dim(a.dim(), precond.dim())?;
    if norm(u0) == 0.0 {
        return Err(Error::ZeroVector);
    }
    if ctx.is_none() && !matches!(policy, StepPolicy::Fixed(_)) {
        return Err(Error::InvalidArgument("this step policy needs the rate context (u*, phi, nu)".into()));
    }
    let explicit = precond.fwd_mode() == FwdMode::Exact;
    let binv = InvOp(precond);
    let tracker = ctx.map(|c| DistTracker { ctx: c, fwd: FwdOp::new(precond) });

    let mut u = u0.to_vec();
    let s = b_norm2(precond, &u)?.sqrt();
    u.iter_mut().for_each(|x| *x /= s);
    let mut bnorm2 = 1.0;

    let mut trace = Trace::default();
    let mut iterates = Vec::new();
    let mut lambdas: Vec<f64> = Vec::new();
    let mut prev_dist: Option<f64> = None;

    for t in 0.. {
        let state = IterateState::new(u, a, &binv, bnorm2)?;
        if opts.keep_iterates {
            iterates.push(state.u.clone());
        }
        let dist = tracker.as_ref().map(|tr| tr.dist(&state.u, bnorm2));
        if let (Some(d), Some(pd), Some(last)) = (dist, prev_dist.filter(|&p| p > 0.0), trace.records.last_mut()) {
            last.contraction = Some((d * d) / (pd * pd));
        }
        prev_dist = dist;
        let mut rec = TraceRecord::new(t, state.lambda, state.f, state.residual_norm(), dist);
        lambdas.push(state.lambda);

        let finish = |term: Termination, state: IterateState, mut trace: Trace, rec: TraceRecord, iterates| {
            trace.records.push(rec);
            Ok(SolveResult { lambda: state.lambda, u: state.u, iterations: t, termination: term, trace, iterates })
        };
        if state.relative_residual() <= opts.tol {
            return finish(Termination::ResidualTol, state, trace, rec, iterates);
        }
        if t >= opts.stagnation_window {
            let old = lambdas[t - opts.stagnation_window];
            if (old - state.lambda).abs() <= 1e-15 * state.lambda.abs() {
                return finish(Termination::StagnatedStep, state, trace, rec, iterates);
            }
        }
        if t >= opts.maxit {
            return finish(Termination::MaxIters, state, trace, rec, iterates);
        }
        if state.g2 <= 0.0 {
            return Err(Error::ZeroGradientAtNonEigenvector);
        }
        let g = state.g2.sqrt();

        let cos_dist = ctx.map(|c| c.cos_dist(&state.u, bnorm2.sqrt()));
        if let (Some(c), Some(cd)) = (ctx, cos_dist) {
            if cd <= c.cos_phi {
                if policy == StepPolicy::TheoryLocal {
                    return Err(Error::OutsideBasin { dist: cd.acos(), phi: c.phi() });
                }
                trace.events.push(TraceEvent::BasinExit { t });
            }
        }
        let eta = match policy {
            StepPolicy::TheoryLocal => step_theory(&state, ctx.unwrap())?,
            StepPolicy::ConstantCor(c) => step_constant(ctx.unwrap(), c)?,
            StepPolicy::Fixed(v) => v,
        };
        let cap = FRAC_PI_2 / g;
        if eta >= cap {
            return Err(Error::StepCapViolated { eta, cap });
        }
        rec.xi = match (ctx, cos_dist) {
            (Some(c), Some(cd)) if policy == StepPolicy::TheoryLocal => Some(xi_t_with(&state, c, cd)),
            (Some(c), Some(cd)) => Some(eta * mu_x(&state, c) * a_x_with(&state, c, cd)),
            _ => None,
        };

        let eta_star = 2.0 * (eta * g).tan() * state.uu / (g * state.uau * state.uau) * state.bnorm2;
        let mut next = state.u.clone();
        axpy(-eta_star, &state.binv_r, &mut next);
        let nb2 = if explicit || (t + 1) % opts.renorm_every.max(1) == 0 {
            b_norm2(precond, &next)?
        } else {
            // uᵀr = 0, so ‖u − η*B⁻¹r‖²_B = ‖u‖²_B + η*²·rᵀB⁻¹r
            bnorm2 + eta_star * eta_star * state.rbr
        };
        let beta = 1.0 / nb2.sqrt();
        next.iter_mut().for_each(|x| *x *= beta);
        bnorm2 = if explicit { dot(&next, &precond.apply_fwd(&next)?) } else { 1.0 };
        rec.eta = Some(eta);
        rec.eta_star = Some(eta_star);
        rec.beta = Some(beta);
        trace.records.push(rec);
        u = next;
    }
    unreachable!()
}

/// `u ← u − B⁻¹r`, normalized in the Euclidean norm.
pub fn pinvit_classic_solve(
    a: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    u0: &[f64],
    ctx: Option<&RateContext>,
    opts: &SolveOptions,
) -> Result<SolveResult> {
    crate::linalg::check_dim(a.dim(), u0.len())?;
    crate::linalg::check_dim(a.dim(), precond.dim())?;
    let n0 = norm(u0);
    if n0 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let binv = InvOp(precond);
    let tracker = ctx.map(|c| DistTracker { ctx: c, fwd: FwdOp::new(precond) });
    let mut u: Vec<f64> = u0.iter().map(|x| x / n0).collect();
    let mut trace = Trace::default();
    let mut iterates = Vec::new();
    let mut lambdas = Vec::new();
    let mut prev_dist: Option<f64> = None;
    for t in 0.. {
        // ‖u‖²_B only feeds the distance column
        let bn2 = if tracker.is_some() { b_norm2(precond, &u)? } else { 1.0 };
        let state = IterateState::new(u, a, &binv, bn2)?;
        if opts.keep_iterates {
            iterates.push(state.u.clone());
        }
        let dist = tracker.as_ref().map(|tr| tr.dist(&state.u, bn2));
        if let (Some(d), Some(pd), Some(last)) = (dist, prev_dist.filter(|&p| p > 0.0), trace.records.last_mut()) {
            last.contraction = Some((d * d) / (pd * pd));
        }
        prev_dist = dist;
        let mut rec = TraceRecord::new(t, state.lambda, state.f, state.residual_norm(), dist);
        lambdas.push(state.lambda);
        let term = if state.relative_residual() <= opts.tol {
            Some(Termination::ResidualTol)
        } else if t >= opts.stagnation_window
            && (lambdas[t - opts.stagnation_window] - state.lambda).abs() <= 1e-15 * state.lambda.abs()
        {
            Some(Termination::StagnatedStep)
        } else if t >= opts.maxit {
            Some(Termination::MaxIters)
        } else {
            None
        };
        if let Some(termination) = term {
            trace.records.push(rec);
            return Ok(SolveResult { lambda: state.lambda, u: state.u, iterations: t, termination, trace, iterates });
        }
        let mut next = state.u;
        axpy(-1.0, &state.binv_r, &mut next);
        let nn = norm(&next);
        next.iter_mut().for_each(|x| *x /= nn);
        rec.eta = Some(1.0);
        rec.eta_star = Some(1.0);
        rec.beta = Some(1.0 / nn);
        trace.records.push(rec);
        u = next;
    }
    unreachable!()
}
