//! The ten acceptance criteria, each reported on one line.
//!
//! Criteria recorded as unattainable are listed in `KNOWN_FAILING`; the run
//! fails if any other criterion fails or if a listed one starts passing.

mod common;

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::XSpace;
use rsd_eig::diagnostics::validate::InstanceKind;
use rsd_eig::diagnostics::{
    cos_phi_direct, cos_phi_variational, kappa_nu, success_probability, validate_properties, xi_t, Fault,
    KappaOptions, PrecondQuality, RateContext, Sampler, ValidationInstance,
};
use rsd_eig::geometry::IterateState;
use rsd_eig::linalg::{dense_sym_eig, Rng};
use rsd_eig::par::Execution;
use rsd_eig::precond::{epsilon_l, DensePreconditioner, InvOp, MpMode, Preconditioner};
use rsd_eig::problems::{fd_spectrum, laplace_fd, laplace_fem, EigenProblem};
use rsd_eig::recipe::{PrecondRecipe, ProblemRecipe};
use rsd_eig::solvers::{pinvit_classic_solve, rsd_solve, SolveOptions, StepPolicy};

/// The smoothness inequality (i) is false as stated; see the decisions ledger.
const KNOWN_FAILING: &[usize] = &[2];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

struct Pair {
    inst: ValidationInstance,
    precond: DensePreconditioner,
    ctx: RateContext,
    x: XSpace,
}

fn pair(kind: InstanceKind, n: usize, seed: u64) -> Pair {
    let inst = ValidationInstance::generate(kind, n, seed).unwrap();
    let precond = DensePreconditioner::new(inst.b.clone()).unwrap();
    let e = dense_sym_eig(&inst.a).unwrap();
    let (lo, hi, _) = kappa_nu(&inst.a, &precond, KappaOptions::default()).unwrap();
    let ctx =
        RateContext::from_parts(&inst.a, &precond, e.values[0], e.values[1], e.values[n - 1], e.vectors[0].clone(), lo, hi)
            .unwrap();
    let x = XSpace::new(&inst.a, &inst.b);
    Pair { inst, precond, ctx, x }
}

fn no_stagnation(maxit: usize, tol: f64) -> SolveOptions {
    SolveOptions { maxit, tol, stagnation_window: usize::MAX / 2, keep_iterates: true, ..Default::default() }
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    let mut worst_eta = 0.0f64;
    for seed in 0..20 {
        let p = pair(InstanceKind::RandomSpd, 20, 1000 + seed);
        let w = Rng::new(seed).gaussian_vector(20);
        let u0 = p.x.u_at_angle(0.6 * p.x.phi(), &w);
        let r = rsd_solve(&p.inst.a, &p.precond, &u0, StepPolicy::TheoryLocal, Some(&p.ctx), &no_stagnation(50, 0.0))
            .unwrap();
        if r.iterates.len() != 51 {
            return outcome(false, format!("seed {seed}: only {} iterates", r.iterates.len()));
        }
        let mut x = p.x.x_of_u(&u0);
        for t in 0..50 {
            let eta = p.x.a(&x) / p.x.gamma(&x);
            worst_eta = worst_eta.max((eta - r.trace.records[t].eta.unwrap()).abs() / eta);
            x = p.x.step(&x, eta);
            let xu = p.x.x_of_u(&r.iterates[t + 1]);
            worst = worst.max(common::sphere_dist_pm(&x, &xu));
        }
    }
    outcome(worst <= 1e-10, format!("max per-step deviation {worst:.2e} (step sizes agree to {worst_eta:.1e})"))
}

fn criterion_2() -> Outcome {
    let mut counts = [0usize; 7];
    let mut checked = [0usize; 7];
    let mut fixed = 0usize;
    for kind in InstanceKind::ALL {
        for n in [6, 12, 20] {
            for seed in 0..20 {
                let inst = ValidationInstance::generate(kind, n, seed).unwrap();
                let r = validate_properties(&inst, 500, seed, Fault::None).unwrap();
                for k in 0..7 {
                    counts[k] += r.stats[k].violations;
                    checked[k] += r.stats[k].checked;
                }
                fixed += r.smoothness_2gamma.violations;
            }
        }
    }
    let total: usize = counts.iter().sum();
    outcome(
        total == 0,
        format!("violations (i)..(vii) = {counts:?} of {checked:?} checks; (i) with 2 gamma: {fixed} violations"),
    )
}

/// The ten instances shared by criteria 3 and 4.
fn rate_instances() -> Vec<Pair> {
    (0..10).map(|s| pair(InstanceKind::RandomSpd, 12, 2000 + s)).collect()
}

fn criterion_3() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for (i, p) in rate_instances().iter().enumerate() {
        let w = Rng::new(i as u64).gaussian_vector(12);
        let u0 = p.x.u_at_angle(0.9 * p.x.phi(), &w);
        let r = rsd_solve(&p.inst.a, &p.precond, &u0, StepPolicy::TheoryLocal, Some(&p.ctx), &no_stagnation(5000, 1e-15))
            .unwrap();
        for w in r.trace.records.windows(2) {
            let (d0, d1) = (w[0].dist_b.unwrap(), w[1].dist_b.unwrap());
            if d0 <= 1e-8 {
                break;
            }
            steps += 1;
            worst = worst.min((1.0 - w[0].xi.unwrap()) * d0 * d0 + 1e-12 - d1 * d1);
        }
    }
    outcome(worst >= 0.0, format!("{steps} steps checked, smallest margin {worst:.3e}"))
}

fn criterion_4() -> Outcome {
    let c = 0.25;
    let mut worst = f64::INFINITY;
    let mut steps = 0;
    for (i, p) in rate_instances().iter().enumerate() {
        let (cp, sp) = (p.ctx.cos_phi, p.ctx.sin_phi);
        let margin_cos = cp + c * sp * sp;
        let theta0 = 0.99 * margin_cos.min(1.0).acos();
        let w = Rng::new(100 + i as u64).gaussian_vector(12);
        let u0 = p.x.u_at_angle(theta0, &w);
        let rate = rsd_eig::diagnostics::constant_step_rate(&p.ctx, c);
        let r = rsd_solve(&p.inst.a, &p.precond, &u0, StepPolicy::ConstantCor(c), Some(&p.ctx), &no_stagnation(400, 1e-15))
            .unwrap();
        let d0 = r.trace.records[0].dist_b.unwrap();
        if d0.cos() < margin_cos {
            return outcome(false, format!("instance {i}: start violates the margin condition"));
        }
        for (t, rec) in r.trace.records.iter().enumerate() {
            let d = rec.dist_b.unwrap();
            if d <= 1e-8 {
                break;
            }
            steps += 1;
            let bound = rate.powi(t as i32) * d0 * d0;
            worst = worst.min((bound - d * d) / bound);
        }
    }
    outcome(worst >= 0.0, format!("{steps} iterates checked, smallest relative margin {worst:.3e}"))
}

fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    for kind in InstanceKind::ALL {
        for n in [6, 12, 20] {
            for seed in 0..20 {
                let inst = ValidationInstance::generate(kind, n, seed).unwrap();
                let b = DensePreconditioner::new(inst.b.clone()).unwrap();
                let u = dense_sym_eig(&inst.a).unwrap().vectors[0].clone();
                let bu = b.apply_fwd(&u).unwrap();
                let (_, direct) = cos_phi_direct(&u, &b.apply_inv(&u), &bu);
                let var = cos_phi_variational(&u, &bu, &InvOp(&b));
                worst = worst.max((direct - var).abs());
                count += 1;
            }
        }
    }
    // Monte-Carlo supremum over probes v ⊥ u*
    let mut excess = f64::NEG_INFINITY;
    for seed in 0..10 {
        let inst = ValidationInstance::generate(InstanceKind::RandomSpd, 6, 300 + seed).unwrap();
        let b = DensePreconditioner::new(inst.b.clone()).unwrap();
        let u = dense_sym_eig(&inst.a).unwrap().vectors[0].clone();
        let binv_u = b.apply_inv(&u);
        let (_, closed) = cos_phi_direct(&u, &binv_u, &b.apply_fwd(&u).unwrap());
        let ubu = common::dot(&u, &binv_u).sqrt();
        let mut rng = Rng::new(seed);
        let mut sup = 0.0f64;
        for _ in 0..10_000 {
            let mut v = rng.gaussian_vector(6);
            let c = common::dot(&v, &u) / common::dot(&u, &u);
            v.iter_mut().zip(&u).for_each(|(vi, ui)| *vi -= c * ui);
            let vbv = common::dot(&v, &b.apply_inv(&v)).sqrt();
            sup = sup.max(common::dot(&v, &binv_u).abs() / (vbv * ubu));
        }
        excess = excess.max(sup - closed);
    }
    outcome(
        worst <= 1e-8 && excess <= 1e-6,
        format!("{count} instances, max |direct - variational| {worst:.2e}; probe sup - closed form <= {excess:.2e}"),
    )
}

fn ddm_quality(h: f64, coarse_h: f64) -> PrecondQuality {
    let problem = ProblemRecipe::LaplaceFem { h };
    let pre = PrecondRecipe::Ddm { coarse_h, overlap: 0.5 };
    let p = problem.build(Execution::Parallel).unwrap().problem;
    let b = pre.build(&p, Execution::Parallel).unwrap().precond;
    PrecondQuality::from_context(&RateContext::new(&p, b.as_ref(), None).unwrap())
}

fn criterion_6() -> Outcome {
    let q = ddm_quality(0.0625, 0.25);
    let near = (q.cos2_phi - 0.1961).abs() <= 0.06 && (q.one_minus_inv_kappa - 0.8221).abs() <= 0.06;
    let c2 = ddm_quality(1.0 / 64.0, 0.25).cos2_phi;
    let c3 = ddm_quality(1.0 / 64.0, 0.125).cos2_phi;
    outcome(
        near && c2 >= 2.0 * c3,
        format!(
            "h=2^-4,H=2^-2: cos2_phi {:.4}, 1-1/kappa {:.4}; h=2^-6: cos2_phi {c2:.4} -> {c3:.4} (factor {:.2})",
            q.cos2_phi,
            q.one_minus_inv_kappa,
            c2 / c3
        ),
    )
}

fn kernel_mp(n: usize) -> (Arc<EigenProblem>, Arc<dyn Preconditioner>) {
    let problem: ProblemRecipe = format!("kernel-laplace:n={n},seed=1").parse().unwrap();
    let p = problem.build(Execution::Parallel).unwrap().problem;
    let b = PrecondRecipe::MpChol { mode: MpMode::ExactFactor }.build(&p, Execution::Parallel).unwrap().precond;
    (p, b)
}

fn criterion_7() -> Outcome {
    let (p, b) = kernel_mp(256);
    let ctx = RateContext::new(&p, b.as_ref(), None).unwrap();
    let (eps, small) = epsilon_l(256, ctx.lambda1, ctx.lambdan);
    let bound_ok = !small || ctx.cos_phi <= (2.0 * eps).sqrt();
    outcome(
        bound_ok && ctx.cos_phi <= 0.05,
        format!("epsilon_l {eps:.4}, cos_phi {:.3e}, sqrt(2 eps_l) {:.4}", ctx.cos_phi, (2.0 * eps).sqrt()),
    )
}

fn criterion_8() -> Outcome {
    let (p, b) = kernel_mp(256);
    let ctx = RateContext::new(&p, b.as_ref(), None).unwrap();
    let k = success_probability(p.as_ref(), b.as_ref(), &ctx, Sampler::Gaussian, 100, 7, Execution::Parallel).unwrap();
    let problem = ProblemRecipe::LaplaceFem { h: 0.0625 };
    let pf = problem.build(Execution::Parallel).unwrap().problem;
    let bf = PrecondRecipe::Ddm { coarse_h: 0.25, overlap: 0.5 }.build(&pf, Execution::Parallel).unwrap().precond;
    let ctxf = RateContext::new(&pf, bf.as_ref(), None).unwrap();
    let d = success_probability(pf.as_ref(), bf.as_ref(), &ctxf, Sampler::Smooth, 200, 7, Execution::Parallel).unwrap();
    outcome(
        k.new >= 95 && k.classic == 0 && d.new > d.classic,
        format!(
            "kernel mp-chol: new {}/100, classic {}/100; fem ddm smooth: new {}/200, classic {}/200",
            k.new, k.classic, d.new, d.classic
        ),
    )
}

fn criterion_9() -> Outcome {
    let problem = ProblemRecipe::LaplaceFd { h: 0.0625 };
    let p = problem.build(Execution::Parallel).unwrap().problem;
    let built = PrecondRecipe::Scaled(Box::new(PrecondRecipe::Ddm { coarse_h: 0.25, overlap: 0.5 }))
        .build(&p, Execution::Parallel)
        .unwrap();
    let reference = p.reference().unwrap().clone();
    let (l1, l2) = (reference.lambda1, reference.lambda2);
    let rho_b = built.rho_b.unwrap();
    let r = 1.0 - (1.0 - rho_b) * (1.0 - l1 / l2);
    let mut rng = Rng::new(11);
    let mut u0 = reference.u_star.clone();
    let w = common::normalized(&rng.gaussian_vector(u0.len()));
    u0.iter_mut().zip(&w).for_each(|(u, w)| *u += 0.1 * w);
    let lam0 = rsd_eig::geometry::rayleigh(&u0, p.as_ref()).unwrap();
    if lam0 >= l2 {
        return outcome(false, format!("start has lambda {lam0} >= lambda2 {l2}"));
    }
    let opts = SolveOptions { tol: 1e-13, maxit: 500, ..Default::default() };
    let res = pinvit_classic_solve(p.as_ref(), built.precond.as_ref(), &u0, None, &opts).unwrap();
    let q = |l: f64| (l - l1) / (l2 - l);
    let mut worst = f64::INFINITY;
    for w in res.trace.records.windows(2) {
        worst = worst.min(r * r * q(w[0].lambda) + 1e-12 - q(w[1].lambda));
    }
    outcome(
        worst >= 0.0,
        format!("{} steps, rho_B {rho_b:.4}, rho {r:.4}, smallest margin {worst:.3e}", res.iterations),
    )
}

fn criterion_10() -> Outcome {
    let fd = laplace_fd(0.25).unwrap();
    let l_fd = fd.reference().unwrap().lambda1;
    let exact = 128.0 * (PI / 8.0).sin().powi(2);
    let analytic = fd_spectrum(0.25).unwrap()[0];
    let fem = laplace_fem(1.0 / 16.0).unwrap();
    let l_fem = fem.reference().unwrap().lambda1;
    let target = 2.0 * PI * PI;
    let rel = (l_fem - target).abs() / target;
    outcome(
        (l_fd - exact).abs() <= 1e-10 && (analytic - exact).abs() <= 1e-10 && rel <= 0.02,
        format!("FD lambda1 {l_fd:.12} vs {exact:.12}; FEM lambda1 {l_fem:.6} ({:.3}% from 2 pi^2)", 100.0 * rel),
    )
}

/// Checks that the closed-form `ξ_t` matches its definition on the way; a
/// cheap sanity guard for criterion 3.
fn xi_consistency() -> f64 {
    let p = pair(InstanceKind::RandomSpd, 12, 2000);
    let w = Rng::new(0).gaussian_vector(12);
    let u = p.x.u_at_angle(0.5 * p.x.phi(), &w);
    let st = IterateState::new(u, &p.inst.a, &InvOp(&p.precond), 1.0).unwrap();
    let a = rsd_eig::diagnostics::a_x(&st, &p.ctx);
    let g = rsd_eig::diagnostics::gamma_x(&st, &p.ctx);
    let m = rsd_eig::diagnostics::mu_x(&st, &p.ctx);
    (xi_t(&st, &p.ctx) - a * a * m / g).abs() / xi_t(&st, &p.ctx)
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("equivalence of u-space and x-space steepest descent", criterion_1, Duration::from_secs(10)),
        ("property suite (i)-(vii)", criterion_2, Duration::from_secs(60)),
        ("per-step contraction with the theory step", criterion_3, Duration::from_secs(30)),
        ("constant-step rate", criterion_4, Duration::from_secs(30)),
        ("cos phi cross-check", criterion_5, Duration::from_secs(60)),
        ("DDM angle table", criterion_6, Duration::from_secs(120)),
        ("mixed-precision angle bound", criterion_7, Duration::from_secs(60)),
        ("success probabilities", criterion_8, Duration::from_secs(180)),
        ("classical PINVIT bound", criterion_9, Duration::from_secs(60)),
        ("discretization sanity", criterion_10, Duration::from_secs(60)),
    ];
    let mut unexpected = Vec::new();
    for (i, (name, run, limit)) in criteria.iter().enumerate() {
        let id = i + 1;
        let t = Instant::now();
        let o = run();
        let el = t.elapsed();
        let pass = o.pass && el <= *limit;
        let known = KNOWN_FAILING.contains(&id);
        println!(
            "criterion {id:>2} {} {name}: {} [{:.2} s, limit {} s]{}",
            if pass { "PASS" } else { "FAIL" },
            o.detail,
            el.as_secs_f64(),
            limit.as_secs(),
            if known { " (recorded as unattainable)" } else { "" }
        );
        if pass == known {
            unexpected.push(id);
        }
    }
    println!("xi_t closed form vs a^2 mu / gamma: relative gap {:.1e}", xi_consistency());
    if !unexpected.is_empty() {
        eprintln!("unexpected outcome for criteria {unexpected:?}");
        std::process::exit(1);
    }
}
