//! `rsd-eig`: solve, diagnose and tabulate preconditioned eigenproblems.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use rsd_eig::diagnostics::validate::InstanceKind;
use rsd_eig::diagnostics::{
    check_initial, success_probability, validate_properties, Fault, PrecondQuality, RateContext, Sampler,
    SuccessCounts, ValidationInstance,
};
use rsd_eig::experiments::{precond_quality, run_table, TableConfig, TableName};
use rsd_eig::linalg::{LinearOperator, Rng};
use rsd_eig::par::{derive_seed, Execution};
use rsd_eig::precond::Preconditioner;
use rsd_eig::problems::EigenProblem;
use rsd_eig::recipe::{PrecondRecipe, ProblemRecipe};
use rsd_eig::solvers::{pinvit_classic_solve, rsd_solve, SolveOptions, SolveResult, StepPolicy, Termination};
use rsd_eig::Error;

const EXIT_CONFIG: u8 = 1;
const EXIT_MAXIT: u8 = 2;
const EXIT_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(name = "rsd-eig", version, about = "Preconditioned eigensolvers on the sphere")]
struct Cli {
    /// Run everything on one thread, in order.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the smallest eigenpair and write a trace.
    Solve(SolveArgs),
    /// Preconditioner quality: angle, spectral bounds and predicted rates.
    Phi(PhiArgs),
    /// Empirical probability of each starting condition.
    Prob(ProbArgs),
    /// Randomized check of the convergence inequalities.
    Validate(ValidateArgs),
    /// Reproduce a desk-scale experiment table.
    Table(TableArgs),
}

#[derive(Args)]
struct PairArgs {
    /// e.g. laplace-fd:h=2^-4, laplace-fem:h=2^-5, kernel-laplace:n=256,seed=1, mtx:a.mtx[,mass=m.mtx]
    #[arg(long)]
    problem: String,
    /// identity | exact | mp-chol | ddm:H=2^-2,overlap=0.5 | scaled:<inner>
    #[arg(long, default_value = "identity")]
    precond: String,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Method {
    Rsd,
    PinvitVariant,
    PinvitClassic,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Init {
    /// Seeded standard Gaussian.
    Gaussian,
    /// Seeded `B⁻¹ω`.
    Smooth,
    /// Smooth draws until one lies inside the basin.
    Basin,
    /// The reference eigenvector itself.
    Eigvec,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "rsd")]
    method: Method,
    /// theory | const:<c> | fixed:<eta>
    #[arg(long, default_value = "theory")]
    step: String,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    maxit: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Starting vector; `basin` is the default for the theory step.
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Result JSON; standard output when absent.
    #[arg(long)]
    result: Option<PathBuf>,
}

#[derive(Args)]
struct PhiArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct ProbArgs {
    #[command(flatten)]
    pair: PairArgs,
    #[arg(long, value_enum, default_value = "gaussian")]
    sampler: SamplerArg,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// `eigvec` replaces every draw by the reference eigenvector.
    #[arg(long, value_enum)]
    init: Option<Init>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SamplerArg {
    Gaussian,
    Smooth,
}

#[derive(Args)]
struct ValidateArgs {
    /// Number of seeds per (n, kind) cell.
    #[arg(long, default_value_t = 20)]
    seeds: u64,
    #[arg(long, value_delimiter = ',', default_value = "6,12,20")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "identity,random-spd,mp-chol")]
    kinds: Vec<KindArg>,
    #[arg(long, default_value_t = 500)]
    samples: usize,
    /// Negative control: corrupt a(x) on purpose.
    #[arg(long, value_enum, default_value = "none")]
    fault: FaultArg,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum KindArg {
    Identity,
    RandomSpd,
    MpChol,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum FaultArg {
    None,
    FlipSignInA,
}

#[derive(Args)]
struct TableArgs {
    /// phi-ddm-fixedH | phi-ddm-fixedh | prob-ddm | prob-kernel
    name: String,
    /// TOML file with grid overrides.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::PropertyViolation { .. }) => EXIT_VIOLATION,
            _ => EXIT_CONFIG,
        };
        Failure { code, err }
    }
}

type CmdResult = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_CONFIG);
    }
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    let r = match cli.cmd {
        Cmd::Solve(a) => cmd_solve(a, exec),
        Cmd::Phi(a) => cmd_phi(a, exec),
        Cmd::Prob(a) => cmd_prob(a, exec),
        Cmd::Validate(a) => cmd_validate(a),
        Cmd::Table(a) => cmd_table(a, exec),
    };
    match r {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

/// Caps the worker pool at `EIG_THREADS`.
fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("EIG_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().map_err(|_| anyhow!("EIG_THREADS must be a positive integer, got `{v}`"))?;
    if n == 0 {
        bail!("EIG_THREADS must be positive");
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn parse_pair(p: &PairArgs) -> anyhow::Result<(ProblemRecipe, PrecondRecipe)> {
    let problem: ProblemRecipe = p.problem.parse().with_context(|| format!("problem recipe `{}`", p.problem))?;
    let precond: PrecondRecipe = p.precond.parse().with_context(|| format!("preconditioner recipe `{}`", p.precond))?;
    precond.check(&problem)?;
    Ok((problem, precond))
}

fn build_pair(
    problem: &ProblemRecipe,
    precond: &PrecondRecipe,
    exec: Execution,
) -> anyhow::Result<(Arc<EigenProblem>, Arc<dyn Preconditioner>)> {
    let p = problem.build(exec).with_context(|| format!("building {problem}"))?.problem;
    let b = precond.build(&p, exec).with_context(|| format!("building {precond}"))?.precond;
    Ok((p, b))
}

fn write_or_print(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => fs::write(p, content).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(content.as_bytes())?;
            Ok(())
        }
    }
}

fn parse_step(s: &str) -> anyhow::Result<StepPolicy> {
    let p = if s == "theory" {
        StepPolicy::TheoryLocal
    } else if let Some(c) = s.strip_prefix("const:") {
        StepPolicy::ConstantCor(c.parse().with_context(|| format!("step constant `{c}`"))?)
    } else if let Some(v) = s.strip_prefix("fixed:") {
        StepPolicy::Fixed(v.parse().with_context(|| format!("fixed step `{v}`"))?)
    } else {
        bail!("unknown step policy `{s}` (theory | const:<c> | fixed:<eta>)");
    };
    p.validate()?;
    Ok(p)
}

#[derive(Serialize)]
struct SolveReport {
    problem: String,
    precond: String,
    method: &'static str,
    step: String,
    seed: u64,
    init: &'static str,
    /// Draws needed by the `basin` initializer.
    init_draws: usize,
    termination: Termination,
    iterations: usize,
    lambda: f64,
    reference_lambda1: f64,
    abs_error: f64,
    relative_residual: f64,
    basin_exits: usize,
}

fn draw_start(
    init: Init,
    p: &EigenProblem,
    b: &dyn Preconditioner,
    ctx: &RateContext,
    seed: u64,
) -> anyhow::Result<(Vec<f64>, usize)> {
    let n = p.dim();
    let smooth = |k: u64| b.apply_inv(&Rng::new(derive_seed(seed, k)).gaussian_vector(n));
    Ok(match init {
        Init::Gaussian => (Rng::new(seed).gaussian_vector(n), 1),
        Init::Smooth => (smooth(0), 1),
        Init::Eigvec => (ctx.u_star.clone(), 0),
        Init::Basin => {
            const MAX_DRAWS: u64 = 1000;
            for k in 0..MAX_DRAWS {
                let u0 = smooth(k);
                if check_initial(&u0, None, p, b, ctx)?.condition_new {
                    return Ok((u0, k as usize + 1));
                }
            }
            bail!("no draw among {MAX_DRAWS} landed inside the basin dist_B < phi");
        }
    })
}

fn cmd_solve(a: SolveArgs, exec: Execution) -> CmdResult {
    let (problem, precond) = parse_pair(&a.pair)?;
    let policy = parse_step(&a.step)?;
    if !(a.tol > 0.0) || a.maxit == 0 {
        return Err(anyhow!("need tol > 0 and maxit >= 1").into());
    }
    let (p, b) = build_pair(&problem, &precond, exec)?;
    let ctx = RateContext::new(&p, b.as_ref(), None)?;
    let init = a.init.unwrap_or(if policy == StepPolicy::TheoryLocal { Init::Basin } else { Init::Smooth });
    let (u0, draws) = draw_start(init, &p, b.as_ref(), &ctx, a.seed)?;
    let opts = SolveOptions { tol: a.tol, maxit: a.maxit, ..Default::default() };
    let res: SolveResult = match a.method {
        Method::Rsd | Method::PinvitVariant => rsd_solve(p.as_ref(), b.as_ref(), &u0, policy, Some(&ctx), &opts)?,
        Method::PinvitClassic => pinvit_classic_solve(p.as_ref(), b.as_ref(), &u0, Some(&ctx), &opts)?,
    };
    if let Some(path) = &a.trace {
        fs::write(path, res.trace.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    let last = res.trace.records.last().expect("trace holds the final iterate");
    let report = SolveReport {
        problem: problem.to_string(),
        precond: precond.to_string(),
        method: match a.method {
            Method::Rsd => "rsd",
            Method::PinvitVariant => "pinvit-variant",
            Method::PinvitClassic => "pinvit-classic",
        },
        step: a.step.clone(),
        seed: a.seed,
        init: match init {
            Init::Gaussian => "gaussian",
            Init::Smooth => "smooth",
            Init::Basin => "basin",
            Init::Eigvec => "eigvec",
        },
        init_draws: draws,
        termination: res.termination,
        iterations: res.iterations,
        lambda: res.lambda,
        reference_lambda1: ctx.lambda1,
        abs_error: (res.lambda - ctx.lambda1).abs(),
        relative_residual: last.resnorm / (res.lambda.abs() * rsd_eig::linalg::norm(&res.u)),
        basin_exits: res.trace.events.len(),
    };
    write_or_print(a.result.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))?;
    Ok(match res.termination {
        Termination::MaxIters => EXIT_MAXIT,
        _ => 0,
    })
}

fn fmt4(x: f64) -> String {
    format!("{x:.4}")
}

fn quality_text(q: &PrecondQuality) -> String {
    let mut cols: Vec<(&str, String)> = vec![
        ("cos2_phi", fmt4(q.cos2_phi)),
        ("1-1/kappa", fmt4(q.one_minus_inv_kappa)),
        ("chi", q.chi.map_or_else(|| "n/a".into(), fmt4)),
        ("kappa_nu", fmt4(q.kappa_nu)),
        ("rho_B", fmt4(q.rho_b)),
        ("rho", fmt4(q.rho)),
        ("xi_inf", fmt4(q.xi_inf)),
    ];
    if let Some(eps) = q.epsilon_l {
        cols.push(("cos_phi", format!("{:.4e}", q.cos_phi)));
        cols.push(("epsilon_l", fmt4(eps)));
        cols.push(("sqrt(2 eps_l)", if eps < 1.0 { fmt4((2.0 * eps).sqrt()) } else { "n/a".into() }));
    }
    let w: Vec<usize> = cols.iter().map(|(h, v)| h.len().max(v.len())).collect();
    let head: Vec<String> = cols.iter().zip(&w).map(|((h, _), w)| format!("{h:>w$}")).collect();
    let vals: Vec<String> = cols.iter().zip(&w).map(|((_, v), w)| format!("{v:>w$}")).collect();
    format!("{}\n{}\n", head.join("  "), vals.join("  "))
}

fn cmd_phi(a: PhiArgs, exec: Execution) -> CmdResult {
    let (problem, precond) = parse_pair(&a.pair)?;
    let (p, b) = build_pair(&problem, &precond, exec)?;
    let mp = matches!(precond, PrecondRecipe::MpChol { .. });
    let (_, q) = precond_quality(&p, b.as_ref(), mp)?;
    print!("{}", quality_text(&q));
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&q)? + "\n").with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn cmd_prob(a: ProbArgs, exec: Execution) -> CmdResult {
    let (problem, precond) = parse_pair(&a.pair)?;
    if a.trials == 0 {
        return Err(anyhow!("trials must be >= 1").into());
    }
    let (p, b) = build_pair(&problem, &precond, exec)?;
    let ctx = RateContext::new(&p, b.as_ref(), None)?;
    let counts = match a.init {
        Some(Init::Eigvec) => {
            let c = check_initial(&ctx.u_star, None, p.as_ref(), b.as_ref(), &ctx)?;
            SuccessCounts {
                trials: a.trials,
                new: if c.condition_new { a.trials } else { 0 },
                classic: if c.condition_classic { a.trials } else { 0 },
            }
        }
        None => {
            let sampler = match a.sampler {
                SamplerArg::Gaussian => Sampler::Gaussian,
                SamplerArg::Smooth => Sampler::Smooth,
            };
            success_probability(p.as_ref(), b.as_ref(), &ctx, sampler, a.trials, a.seed, exec)?
        }
        Some(_) => return Err(anyhow!("prob accepts only --init eigvec").into()),
    };
    let mut csv = String::from("condition,successes,trials,fraction\n");
    csv += &format!("new,{},{},{:.16e}\n", counts.new, counts.trials, counts.p_new());
    csv += &format!("classic,{},{},{:.16e}\n", counts.classic, counts.trials, counts.p_classic());
    write_or_print(a.out.as_deref(), &csv)?;
    Ok(0)
}

#[derive(Serialize)]
struct ValidateSummary {
    instances: usize,
    violations: usize,
    /// Violations of (i) once `γ` is doubled; informational.
    smoothness_2gamma_violations: usize,
    reports: Vec<rsd_eig::diagnostics::PropertyReport>,
}

fn cmd_validate(a: ValidateArgs) -> CmdResult {
    let fault = match a.fault {
        FaultArg::None => Fault::None,
        FaultArg::FlipSignInA => Fault::FlipSignInA,
    };
    let mut reports = Vec::new();
    for &kind in &a.kinds {
        let kind = match kind {
            KindArg::Identity => InstanceKind::Identity,
            KindArg::RandomSpd => InstanceKind::RandomSpd,
            KindArg::MpChol => InstanceKind::MpChol,
        };
        for &n in &a.sizes {
            for seed in 0..a.seeds {
                let inst = ValidationInstance::generate(kind, n, seed)?;
                reports.push(validate_properties(&inst, a.samples, seed, fault)?);
            }
        }
    }
    let violations: usize = reports.iter().map(|r| r.violations()).sum();
    let summary = ValidateSummary {
        instances: reports.len(),
        violations,
        smoothness_2gamma_violations: reports.iter().map(|r| r.smoothness_2gamma.violations).sum(),
        reports,
    };
    let names = rsd_eig::diagnostics::validate::PROPERTY_NAMES;
    println!("{} instances, {} samples each", summary.instances, a.samples);
    for (k, name) in names.iter().enumerate() {
        let checked: usize = summary.reports.iter().map(|r| r.stats[k].checked).sum();
        let bad: usize = summary.reports.iter().map(|r| r.stats[k].violations).sum();
        println!("  ({name}) checked {checked}, violations {bad}");
    }
    println!("  (i with 2 gamma) violations {}", summary.smoothness_2gamma_violations);
    if let Some(path) = &a.json {
        fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if violations == 0 {
        println!("PASS");
        return Ok(0);
    }
    let first = summary.reports.iter().find_map(|r| r.first_violation.as_ref().map(|v| (r, v))).expect("violation");
    println!("FAIL");
    eprintln!(
        "first violation: instance {} property ({}) sample {}: {}\ncounterexample: {}",
        first.0.instance,
        first.1.property,
        first.1.sample,
        first.1.detail,
        serde_json::to_string(&first.1.counterexample)?
    );
    Ok(EXIT_VIOLATION)
}

fn cmd_table(a: TableArgs, exec: Execution) -> CmdResult {
    let name: TableName = a.name.parse()?;
    let cfg: TableConfig = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TableConfig::default(),
    };
    let table = run_table(name, &cfg, exec)?;
    write_or_print(a.out.as_deref(), &table.to_csv())?;
    let mut err = std::io::stderr();
    write!(err, "{}", table.to_text())?;
    for (i, s) in table.seconds.iter().enumerate() {
        writeln!(err, "row {i}: {s:.3} s")?;
    }
    Ok(0)
}
