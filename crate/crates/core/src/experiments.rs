//! Desk-scale versions of the experiment tables.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{success_probability, PrecondQuality, RateContext, Sampler, SuccessCounts};
use crate::linalg::LinearOperator;
use crate::par::{derive_seed, map_slice, Execution};
use crate::precond::{epsilon_l, MpMode, Preconditioner};
use crate::problems::{EigenProblem, KernelKind, KernelSpec};
use crate::recipe::{format_width, parse_width, PrecondRecipe, ProblemRecipe};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableName {
    /// cos²φ for DDM at fixed `H`, refining `h`.
    PhiDdmFixedH,
    /// cos²φ for DDM at fixed `h`, refining `H`.
    PhiDdmFixedh,
    ProbDdm,
    ProbKernel,
}

impl TableName {
    pub const ALL: [TableName; 4] =
        [TableName::PhiDdmFixedH, TableName::PhiDdmFixedh, TableName::ProbDdm, TableName::ProbKernel];

    pub fn as_str(self) -> &'static str {
        match self {
            TableName::PhiDdmFixedH => "phi-ddm-fixedH",
            TableName::PhiDdmFixedh => "phi-ddm-fixedh",
            TableName::ProbDdm => "prob-ddm",
            TableName::ProbKernel => "prob-kernel",
        }
    }
}

impl FromStr for TableName {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::UnknownTable(s.into()))
    }
}

impl fmt::Display for TableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Grid overrides; anything left out takes the table's default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    /// Fine mesh widths, e.g. `"2^-4"`.
    pub h: Option<Vec<String>>,
    /// Coarse mesh widths.
    #[serde(rename = "H")]
    pub coarse_h: Option<Vec<String>>,
    pub overlap: Option<f64>,
    /// Kernel sizes.
    pub n: Option<Vec<usize>>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub sampler: Option<Sampler>,
    /// Kernel point dimension; defaults to `n`.
    pub d: Option<usize>,
}

fn widths(v: &Option<Vec<String>>, default: &[&str]) -> Result<Vec<f64>> {
    match v {
        Some(list) => list.iter().map(|s| parse_width(s)).collect(),
        None => default.iter().map(|s| parse_width(s)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(u64),
    Real(f64),
    Text(String),
    Missing,
}

impl Value {
    fn csv(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format!("{x:.16e}"),
            Value::Text(s) => s.clone(),
            Value::Missing => String::new(),
        }
    }

    fn human(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => format!("{x:.4}"),
            Value::Text(s) => s.clone(),
            Value::Missing => "n/a".into(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    /// Wall-clock seconds per row; kept out of the CSV.
    pub seconds: Vec<f64>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Value::csv).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }

    /// Right-aligned text with 4 decimals.
    pub fn to_text(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Value::human).collect()).collect();
        let w: Vec<usize> = (0..self.header.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.header[j].len()]).max().unwrap_or(0))
            .collect();
        let line = |r: &[String]| r.iter().zip(&w).map(|(c, w)| format!("{c:>w$}")).collect::<Vec<_>>().join("  ");
        let mut s = line(&self.header);
        s.push('\n');
        for r in &cells {
            s.push_str(&line(r));
            s.push('\n');
        }
        s
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Value>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| &r[j]).collect())
    }
}

/// FNV-1a, for per-cell seeds independent of evaluation order.
fn key_hash(key: &str) -> u64 {
    key.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

pub fn cell_seed(seed: u64, key: &str) -> u64 {
    derive_seed(seed, key_hash(key))
}

/// Diagnostics of a (problem, preconditioner) pair; `ε_l` is attached for
/// dense problems with mixed-precision Cholesky.
pub fn precond_quality(problem: &EigenProblem, precond: &dyn Preconditioner, mp: bool) -> Result<(RateContext, PrecondQuality)> {
    let ctx = RateContext::new(problem, precond, None)?;
    let mut q = PrecondQuality::from_context(&ctx);
    if mp {
        q = q.with_epsilon_l(problem.dim(), ctx.lambda1, ctx.lambdan);
    }
    Ok((ctx, q))
}

fn ddm_pair(h: f64, coarse_h: f64, overlap: f64, exec: Execution) -> Result<(Arc<EigenProblem>, Arc<dyn Preconditioner>)> {
    let problem = ProblemRecipe::LaplaceFem { h };
    let pre = PrecondRecipe::Ddm { coarse_h, overlap };
    pre.check(&problem)?;
    let p = problem.build(exec)?.problem;
    let b = pre.build(&p, exec)?.precond;
    Ok((p, b))
}

fn text(s: impl Into<String>) -> Value {
    Value::Text(s.into())
}

pub fn run_table(name: TableName, cfg: &TableConfig, exec: Execution) -> Result<Table> {
    let overlap = cfg.overlap.unwrap_or(0.5);
    let seed = cfg.seed.unwrap_or(1);
    let header = |cols: &[&str]| cols.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    type Cells = Vec<Result<(Vec<Value>, f64)>>;
    let (header, cells): (Vec<String>, Cells) = match name {
        TableName::PhiDdmFixedH | TableName::PhiDdmFixedh => {
            let (hs, chs) = if name == TableName::PhiDdmFixedH {
                (widths(&cfg.h, &["2^-4", "2^-5", "2^-6"])?, widths(&cfg.coarse_h, &["2^-2"])?)
            } else {
                (widths(&cfg.h, &["2^-6"])?, widths(&cfg.coarse_h, &["2^-2", "2^-3"])?)
            };
            let grid: Vec<(f64, f64)> = hs.iter().flat_map(|&h| chs.iter().map(move |&c| (h, c))).collect();
            // validate every cell before computing any
            for &(h, c) in &grid {
                PrecondRecipe::Ddm { coarse_h: c, overlap }.check(&ProblemRecipe::LaplaceFem { h })?;
            }
            let cells = map_slice(exec, &grid, |&(h, c)| {
                let t = Instant::now();
                let (p, b) = ddm_pair(h, c, overlap, exec)?;
                let (_, q) = precond_quality(&p, b.as_ref(), false)?;
                let row = vec![
                    text(format_width(h)),
                    text(format_width(c)),
                    Value::Real(overlap),
                    Value::Int(p.dim() as u64),
                    Value::Real(q.cos2_phi),
                    Value::Real(q.one_minus_inv_kappa),
                    q.chi.map_or(Value::Missing, Value::Real),
                    Value::Real(q.kappa_nu),
                ];
                Ok((row, t.elapsed().as_secs_f64()))
            });
            (header(&["h", "H", "overlap", "n", "cos2_phi", "one_minus_inv_kappa", "chi", "kappa_nu"]), cells)
        }
        TableName::ProbDdm => {
            let hs = widths(&cfg.h, &["2^-4"])?;
            let chs = widths(&cfg.coarse_h, &["2^-2"])?;
            let trials = cfg.trials.unwrap_or(200);
            let sampler = cfg.sampler.unwrap_or(Sampler::Smooth);
            let grid: Vec<(f64, f64)> = hs.iter().flat_map(|&h| chs.iter().map(move |&c| (h, c))).collect();
            for &(h, c) in &grid {
                PrecondRecipe::Ddm { coarse_h: c, overlap }.check(&ProblemRecipe::LaplaceFem { h })?;
            }
            let cells = map_slice(exec, &grid, |&(h, c)| {
                let t = Instant::now();
                let (p, b) = ddm_pair(h, c, overlap, exec)?;
                let ctx = RateContext::new(&p, b.as_ref(), None)?;
                let key = format!("prob-ddm:h={},H={}", format_width(h), format_width(c));
                let counts = success_probability(p.as_ref(), b.as_ref(), &ctx, sampler, trials, cell_seed(seed, &key), exec)?;
                let mut row = vec![text(format_width(h)), text(format_width(c)), Value::Real(overlap)];
                row.extend(prob_columns(sampler, &counts));
                Ok((row, t.elapsed().as_secs_f64()))
            });
            let mut hd = header(&["h", "H", "overlap"]);
            hd.extend(header(&PROB_COLUMNS));
            (hd, cells)
        }
        TableName::ProbKernel => {
            let ns = cfg.n.clone().unwrap_or_else(|| vec![128, 256]);
            let trials = cfg.trials.unwrap_or(100);
            let sampler = cfg.sampler.unwrap_or(Sampler::Gaussian);
            if ns.iter().any(|&n| n < 2) {
                return Err(Error::Recipe("kernel sizes must be >= 2".into()));
            }
            let cells = map_slice(exec, &ns, |&n| {
                let t = Instant::now();
                let mut spec = KernelSpec::new(KernelKind::Laplacian, n, seed);
                spec.d = cfg.d;
                let p = ProblemRecipe::Kernel(spec).build(exec)?.problem;
                let b = PrecondRecipe::MpChol { mode: MpMode::ExactFactor }.build(&p, exec)?.precond;
                let (ctx, q) = precond_quality(&p, b.as_ref(), true)?;
                let key = format!("prob-kernel:n={n}");
                let counts = success_probability(p.as_ref(), b.as_ref(), &ctx, sampler, trials, cell_seed(seed, &key), exec)?;
                let (eps, _) = epsilon_l(n, ctx.lambda1, ctx.lambdan);
                let mut row = vec![Value::Int(n as u64), Value::Real(eps), Value::Real(q.cos_phi)];
                row.extend(prob_columns(sampler, &counts));
                Ok((row, t.elapsed().as_secs_f64()))
            });
            let mut hd = header(&["n", "epsilon_l", "cos_phi"]);
            hd.extend(header(&PROB_COLUMNS));
            (hd, cells)
        }
    };
    let mut rows = Vec::with_capacity(cells.len());
    let mut seconds = Vec::with_capacity(cells.len());
    for c in cells {
        let (r, s) = c?;
        rows.push(r);
        seconds.push(s);
    }
    Ok(Table { name: name.to_string(), header, rows, seconds })
}

const PROB_COLUMNS: [&str; 6] = ["sampler", "trials", "new", "classic", "p_new", "p_classic"];

fn prob_columns(sampler: Sampler, c: &SuccessCounts) -> Vec<Value> {
    let s = match sampler {
        Sampler::Gaussian => "gaussian",
        Sampler::Smooth => "smooth",
    };
    vec![
        text(s),
        Value::Int(c.trials as u64),
        Value::Int(c.new as u64),
        Value::Int(c.classic as u64),
        Value::Real(c.p_new()),
        Value::Real(c.p_classic()),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names() {
        for t in TableName::ALL {
            assert_eq!(t.as_str().parse::<TableName>().unwrap(), t);
        }
        assert!(matches!("phi-amg".parse::<TableName>(), Err(Error::UnknownTable(_))));
    }

    #[test]
    fn small_phi_table() {
        let cfg = TableConfig { h: Some(vec!["2^-3".into()]), coarse_h: Some(vec!["2^-1".into()]), ..Default::default() };
        let t = run_table(TableName::PhiDdmFixedH, &cfg, Execution::Sequential).unwrap();
        assert_eq!(t.rows.len(), 1);
        let csv = t.to_csv();
        assert!(csv.starts_with("h,H,overlap,n,cos2_phi"));
        assert_eq!(csv, run_table(TableName::PhiDdmFixedH, &cfg, Execution::Parallel).unwrap().to_csv());
        assert!(t.to_text().contains("2^-3"));
    }

    #[test]
    fn bad_cell_is_rejected_up_front() {
        let cfg = TableConfig { h: Some(vec!["2^-3".into()]), coarse_h: Some(vec!["0.3".into()]), ..Default::default() };
        assert!(run_table(TableName::PhiDdmFixedh, &cfg, Execution::Sequential).is_err());
    }
}
