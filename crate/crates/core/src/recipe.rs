//! Flat `name:key=value,...` recipes for problems and preconditioners.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use crate::diagnostics::{kappa_nu, KappaOptions};
use crate::linalg::{mtx, LinearOperator};
use crate::par::Execution;
use crate::precond::{
    make_ddm, make_exact, make_identity, make_mp_cholesky, spectral_scale, HattedPreconditioner, MpMode,
    Preconditioner,
};
use crate::problems::{
    generalized_reduce, kernel_problem, laplace_fd, laplace_fem, mesh_hierarchy, EigenProblem, KernelKind,
    KernelSpec, Operator,
};
use crate::{Error, Result};

/// Largest sparse problem that `mp-chol` densifies.
pub const MP_CHOL_DENSIFY_CAP: usize = 2000;

/// Parses `2^-k`, `1/m` or a decimal; the result must be positive.
pub fn parse_width(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some(k) = s.strip_prefix("2^-") {
        let k: i32 = k.parse().map_err(|_| Error::Recipe(format!("bad exponent in `{s}`")))?;
        if !(0..=60).contains(&k) {
            return Err(Error::Recipe(format!("exponent out of range in `{s}`")));
        }
        (-k as f64).exp2()
    } else if let Some(m) = s.strip_prefix("1/") {
        let m: u64 = m.parse().map_err(|_| Error::Recipe(format!("bad denominator in `{s}`")))?;
        if m == 0 {
            return Err(Error::Recipe("zero denominator".into()));
        }
        1.0 / m as f64
    } else {
        s.parse().map_err(|_| Error::Recipe(format!("cannot parse width `{s}`")))?
    };
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Recipe(format!("width `{s}` must be positive")))
    }
}

/// `2^-k` when `v` is a power of two, else the decimal.
pub fn format_width(v: f64) -> String {
    let k = -v.log2();
    if k >= 0.0 && k.fract() == 0.0 && (-k).exp2() == v {
        format!("2^-{}", k as i64)
    } else {
        format!("{v}")
    }
}

fn split_args(rest: &str) -> Result<Vec<(&str, &str)>> {
    if rest.is_empty() {
        return Ok(Vec::new());
    }
    rest.split(',')
        .map(|kv| kv.split_once('=').ok_or_else(|| Error::Recipe(format!("expected key=value, found `{kv}`"))))
        .collect()
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Recipe(format!("bad value `{v}` for `{key}`")))
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemRecipe {
    LaplaceFd { h: f64 },
    LaplaceFem { h: f64 },
    Kernel(KernelSpec),
    Mtx { path: PathBuf, mass: Option<PathBuf> },
}

impl FromStr for ProblemRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        match name {
            "laplace-fd" | "laplace-fem" => {
                let mut h = None;
                for (k, v) in split_args(rest)? {
                    match k {
                        "h" => h = Some(parse_width(v)?),
                        _ => return Err(Error::Recipe(format!("unknown key `{k}` for {name}"))),
                    }
                }
                let h = h.ok_or_else(|| Error::Recipe(format!("{name} needs h=")))?;
                crate::problems::grid::cells_per_side(h)?;
                Ok(if name == "laplace-fd" { Self::LaplaceFd { h } } else { Self::LaplaceFem { h } })
            }
            "kernel-laplace" | "kernel-poly" => {
                let kind = if name == "kernel-laplace" { KernelKind::Laplacian } else { KernelKind::PolyComplex };
                let (mut n, mut seed, mut d, mut tau) = (None, None, None, 0.0);
                for (k, v) in split_args(rest)? {
                    match k {
                        "n" => n = Some(parse_num::<usize>(k, v)?),
                        "seed" => seed = Some(parse_num::<u64>(k, v)?),
                        "d" => d = Some(parse_num::<usize>(k, v)?),
                        "tau" => tau = parse_num::<f64>(k, v)?,
                        _ => return Err(Error::Recipe(format!("unknown key `{k}` for {name}"))),
                    }
                }
                let n = n.ok_or_else(|| Error::Recipe(format!("{name} needs n=")))?;
                if n < 2 || d == Some(0) || !(tau >= 0.0) {
                    return Err(Error::Recipe(format!("{name}: need n >= 2, d >= 1, tau >= 0")));
                }
                let mut spec = KernelSpec::new(kind, n, seed.unwrap_or(0));
                spec.d = d;
                spec.tau = tau;
                Ok(Self::Kernel(spec))
            }
            "mtx" => {
                let (path, mass) = match rest.split_once(",mass=") {
                    Some((p, m)) => (p, Some(PathBuf::from(m))),
                    None => (rest, None),
                };
                if path.is_empty() {
                    return Err(Error::Recipe("mtx needs a path".into()));
                }
                Ok(Self::Mtx { path: PathBuf::from(path), mass })
            }
            _ => Err(Error::Recipe(format!("unknown problem `{name}`"))),
        }
    }
}

impl fmt::Display for ProblemRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LaplaceFd { h } => write!(f, "laplace-fd:h={}", format_width(*h)),
            Self::LaplaceFem { h } => write!(f, "laplace-fem:h={}", format_width(*h)),
            Self::Kernel(s) => {
                let name = match s.kind {
                    KernelKind::Laplacian => "kernel-laplace",
                    KernelKind::PolyComplex => "kernel-poly",
                };
                write!(f, "{name}:n={},seed={}", s.n, s.seed)?;
                if let Some(d) = s.d {
                    write!(f, ",d={d}")?;
                }
                if s.tau != 0.0 {
                    write!(f, ",tau={}", s.tau)?;
                }
                Ok(())
            }
            Self::Mtx { path, mass } => {
                write!(f, "mtx:{}", path.display())?;
                if let Some(m) = mass {
                    write!(f, ",mass={}", m.display())?;
                }
                Ok(())
            }
        }
    }
}

/// A constructed problem plus by-products of its construction.
pub struct BuiltProblem {
    pub problem: Arc<EigenProblem>,
    /// Largest imaginary part seen while forming a complex kernel.
    pub kernel_imag_max: Option<f64>,
}

impl ProblemRecipe {
    pub fn build(&self, exec: Execution) -> Result<BuiltProblem> {
        let (problem, imag) = match self {
            Self::LaplaceFd { h } => (laplace_fd(*h)?, None),
            Self::LaplaceFem { h } => (laplace_fem(*h)?, None),
            Self::Kernel(spec) => {
                let (p, k) = kernel_problem(spec, exec)?;
                (p, Some(k.imag_max))
            }
            Self::Mtx { path, mass } => {
                let a = mtx::read_path(path)?;
                match mass {
                    Some(m) => (generalized_reduce(a, mtx::read_path(m)?)?, None),
                    None => (EigenProblem::sparse(self.to_string(), a), None),
                }
            }
        };
        Ok(BuiltProblem { problem: Arc::new(problem), kernel_imag_max: imag })
    }

    pub fn mesh_width(&self) -> Option<f64> {
        match self {
            Self::LaplaceFd { h } | Self::LaplaceFem { h } => Some(*h),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PrecondRecipe {
    Identity,
    Exact,
    MpChol { mode: MpMode },
    Ddm { coarse_h: f64, overlap: f64 },
    /// Spectrally scaled so that `ν̃_min + ν̃_max = 2`.
    Scaled(Box<PrecondRecipe>),
}

impl FromStr for PrecondRecipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(inner) = s.strip_prefix("scaled:") {
            return Ok(Self::Scaled(Box::new(inner.parse()?)));
        }
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let args = split_args(rest)?;
        let no_args = |r: Self| {
            if args.is_empty() {
                Ok(r)
            } else {
                Err(Error::Recipe(format!("{name} takes no arguments")))
            }
        };
        match name {
            "identity" => no_args(Self::Identity),
            "exact" => no_args(Self::Exact),
            "mp-chol" => {
                let mut mode = MpMode::ExactFactor;
                for (k, v) in args {
                    match (k, v) {
                        ("mode", "binary32") => mode = MpMode::Binary32,
                        ("mode", "exact-factor") => mode = MpMode::ExactFactor,
                        _ => return Err(Error::Recipe(format!("unknown mp-chol option `{k}={v}`"))),
                    }
                }
                Ok(Self::MpChol { mode })
            }
            "ddm" => {
                let (mut coarse_h, mut overlap) = (None, 0.5);
                for (k, v) in args {
                    match k {
                        "H" => coarse_h = Some(parse_width(v)?),
                        "overlap" => overlap = parse_num::<f64>(k, v)?,
                        _ => return Err(Error::Recipe(format!("unknown key `{k}` for ddm"))),
                    }
                }
                let coarse_h = coarse_h.ok_or_else(|| Error::Recipe("ddm needs H=".into()))?;
                if !(overlap > 0.0 && overlap <= 1.0) {
                    return Err(Error::Recipe(format!("overlap {overlap} must lie in (0, 1]")));
                }
                Ok(Self::Ddm { coarse_h, overlap })
            }
            _ => Err(Error::Recipe(format!("unknown preconditioner `{name}`"))),
        }
    }
}

impl fmt::Display for PrecondRecipe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity => write!(f, "identity"),
            Self::Exact => write!(f, "exact"),
            Self::MpChol { mode: MpMode::ExactFactor } => write!(f, "mp-chol"),
            Self::MpChol { mode: MpMode::Binary32 } => write!(f, "mp-chol:mode=binary32"),
            Self::Ddm { coarse_h, overlap } => write!(f, "ddm:H={},overlap={overlap}", format_width(*coarse_h)),
            Self::Scaled(inner) => write!(f, "scaled:{inner}"),
        }
    }
}

/// A constructed preconditioner; `rho_b` is set for spectrally scaled ones.
pub struct BuiltPrecond {
    pub precond: Arc<dyn Preconditioner>,
    pub rho_b: Option<f64>,
}

impl PrecondRecipe {
    /// Checks the recipe against the problem before any heavy work.
    pub fn check(&self, problem: &ProblemRecipe) -> Result<()> {
        match self {
            Self::Ddm { coarse_h, overlap } => {
                let h = problem
                    .mesh_width()
                    .ok_or_else(|| Error::Recipe("ddm needs a laplace-fd or laplace-fem problem".into()))?;
                mesh_hierarchy(*coarse_h, h, *overlap).map(|_| ())
            }
            Self::Scaled(inner) => inner.check(problem),
            _ => Ok(()),
        }
    }

    pub fn build(&self, problem: &Arc<EigenProblem>, exec: Execution) -> Result<BuiltPrecond> {
        let precond: Arc<dyn Preconditioner> = match self {
            Self::Identity => Arc::new(make_identity(problem.as_ref().dim())),
            Self::Exact => Arc::new(make_exact(problem.clone())?),
            Self::MpChol { mode } => {
                let dense = match problem.as_dense() {
                    Some(a) => a.clone(),
                    None if problem.as_ref().dim() <= MP_CHOL_DENSIFY_CAP => problem.to_dense(),
                    None => {
                        return Err(Error::Recipe(format!(
                            "mp-chol needs a dense problem (dimension {} exceeds {MP_CHOL_DENSIFY_CAP})",
                            problem.as_ref().dim()
                        )))
                    }
                };
                Arc::new(make_mp_cholesky(&dense)?.with_mode(*mode))
            }
            Self::Ddm { coarse_h, overlap } => {
                let h = problem
                    .mesh_width()
                    .ok_or_else(|| Error::Recipe("ddm needs a laplace-fd or laplace-fem problem".into()))?;
                let hier = mesh_hierarchy(*coarse_h, h, *overlap)?;
                let k = match problem.operator() {
                    Operator::Sparse(a) => a.clone(),
                    Operator::Reduced { stiffness, .. } => stiffness.clone(),
                    Operator::Dense(_) => return Err(Error::Recipe("ddm needs a sparse problem".into())),
                };
                let ddm = make_ddm(&hier, Arc::new(k), None, exec)?;
                HattedPreconditioner::for_problem(problem, Arc::new(ddm))?
            }
            Self::Scaled(inner) => {
                let b = inner.build(problem, exec)?;
                let (lo, hi, _) = kappa_nu(problem.as_ref(), b.precond.as_ref(), KappaOptions::default())?;
                let (scaled, rho_b) = spectral_scale(b.precond, lo, hi)?;
                return Ok(BuiltPrecond { precond: Arc::new(scaled), rho_b: Some(rho_b) });
            }
        };
        Ok(BuiltPrecond { precond, rho_b: None })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn widths() {
        assert_eq!(parse_width("2^-4").unwrap(), 0.0625);
        assert_eq!(parse_width("1/16").unwrap(), 0.0625);
        assert_eq!(parse_width("0.25").unwrap(), 0.25);
        assert!(parse_width("-1").is_err());
        assert!(parse_width("2^-x").is_err());
        assert_eq!(format_width(0.0625), "2^-4");
        assert_eq!(format_width(0.3), "0.3");
    }

    #[test]
    fn problem_round_trip() {
        for s in ["laplace-fd:h=2^-4", "laplace-fem:h=2^-5", "kernel-laplace:n=64,seed=3,d=8", "mtx:a.mtx,mass=m.mtx"] {
            let r: ProblemRecipe = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("laplace-fd:h=0.3".parse::<ProblemRecipe>().is_err());
        assert!("laplace-fd".parse::<ProblemRecipe>().is_err());
        assert!("kernel-laplace:n=1".parse::<ProblemRecipe>().is_err());
        assert!("heat:h=2^-3".parse::<ProblemRecipe>().is_err());
    }

    #[test]
    fn precond_round_trip() {
        for s in ["identity", "exact", "mp-chol", "ddm:H=2^-2,overlap=0.5", "scaled:ddm:H=2^-2,overlap=0.5"] {
            let r: PrecondRecipe = s.parse().unwrap();
            assert_eq!(r.to_string(), s);
        }
        assert!("ddm:overlap=0.5".parse::<PrecondRecipe>().is_err());
        assert!("ddm:H=2^-2,overlap=2".parse::<PrecondRecipe>().is_err());
        assert!("identity:x=1".parse::<PrecondRecipe>().is_err());
    }

    #[test]
    fn ddm_needs_mesh() {
        let p: ProblemRecipe = "kernel-laplace:n=8,seed=1".parse().unwrap();
        let d: PrecondRecipe = "ddm:H=2^-1".parse().unwrap();
        assert!(d.check(&p).is_err());
        let p: ProblemRecipe = "laplace-fd:h=2^-3".parse().unwrap();
        d.check(&p).unwrap();
        let built = p.build(Execution::Sequential).unwrap();
        let b = d.build(&built.problem, Execution::Sequential).unwrap();
        assert_eq!(b.precond.dim(), 49);
    }
}
