//! Starting-vector conditions and their empirical success rates.

use serde::{Deserialize, Serialize};

use super::RateContext;
use crate::geometry::rayleigh;
use crate::linalg::{dot, LinearOperator, Rng};
use crate::par::{derive_seed, map_range, Execution};
use crate::precond::Preconditioner;
use crate::Result;

/// Values of `c` at which the simplified starting condition is evaluated.
pub const C_MARGIN_GRID: [f64; 9] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InitialCheck {
    pub dist_b: f64,
    pub phi: f64,
    /// `dist_B(u0, u*) < φ`
    pub condition_new: bool,
    pub lambda_u0: f64,
    pub lambda2: f64,
    /// `λ(u0) < λ2`
    pub condition_classic: bool,
    /// `cos² dist ≥ 1 − (1−2c)/κ` for each `c` of [`C_MARGIN_GRID`].
    pub c_margin: Vec<(f64, bool)>,
}

/// Evaluates both starting conditions; `u0_bnorm2` is `‖u0‖²_B` if already known.
pub fn check_initial(
    u0: &[f64],
    u0_bnorm2: Option<f64>,
    a: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    ctx: &RateContext,
) -> Result<InitialCheck> {
    let lambda_u0 = rayleigh(u0, a)?;
    let bnorm2 = match u0_bnorm2 {
        Some(v) => v,
        None => dot(u0, &precond.apply_fwd(u0)?),
    };
    let cos = ctx.cos_dist(u0, bnorm2.sqrt());
    let dist_b = cos.acos();
    let phi = ctx.phi();
    let kappa = ctx.kappa();
    Ok(InitialCheck {
        dist_b,
        phi,
        condition_new: dist_b < phi,
        lambda_u0,
        lambda2: ctx.lambda2,
        condition_classic: lambda_u0 < ctx.lambda2,
        c_margin: C_MARGIN_GRID.iter().map(|&c| (c, cos * cos >= 1.0 - (1.0 - 2.0 * c) / kappa)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    /// `u0 = ω`, standard Gaussian.
    Gaussian,
    /// `u0 = B⁻¹ω`, i.e. `u0 ∼ N(0, B⁻²)`.
    Smooth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessCounts {
    pub trials: usize,
    pub new: usize,
    pub classic: usize,
}

impl SuccessCounts {
    pub fn p_new(&self) -> f64 {
        self.new as f64 / self.trials as f64
    }

    pub fn p_classic(&self) -> f64 {
        self.classic as f64 / self.trials as f64
    }
}

/// Draws `trials` starting vectors (trial `t` seeded by `derive_seed(seed, t)`)
/// and counts how often each starting condition holds.
pub fn success_probability(
    a: &dyn LinearOperator,
    precond: &dyn Preconditioner,
    ctx: &RateContext,
    sampler: Sampler,
    trials: usize,
    seed: u64,
    exec: Execution,
) -> Result<SuccessCounts> {
    let n = a.dim();
    let outcomes = map_range(exec, trials, |t| -> Result<(bool, bool)> {
        let omega = Rng::new(derive_seed(seed, t as u64)).gaussian_vector(n);
        let (u0, bnorm2) = match sampler {
            Sampler::Gaussian => (omega, None),
            Sampler::Smooth => {
                let u0 = precond.apply_inv(&omega);
                let b2 = dot(&u0, &omega);
                (u0, Some(b2))
            }
        };
        let c = check_initial(&u0, bnorm2, a, precond, ctx)?;
        Ok((c.condition_new, c.condition_classic))
    });
    let mut counts = SuccessCounts { trials, new: 0, classic: 0 };
    for o in outcomes {
        let (new, classic) = o?;
        counts.new += new as usize;
        counts.classic += classic as usize;
    }
    Ok(counts)
}
