//! Per-iteration log of a solve.

use serde::{Deserialize, Serialize};

pub const TRACE_HEADER: &str = "t,lambda,f,resnorm,distB,eta,eta_star,beta,xi,contraction";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub lambda: f64,
    pub f: f64,
    pub resnorm: f64,
    pub dist_b: Option<f64>,
    pub eta: Option<f64>,
    pub eta_star: Option<f64>,
    pub beta: Option<f64>,
    pub xi: Option<f64>,
    /// `dist²(x_{t+1}, x*)/dist²(x_t, x*)`
    pub contraction: Option<f64>,
}

impl TraceRecord {
    pub fn new(t: usize, lambda: f64, f: f64, resnorm: f64, dist_b: Option<f64>) -> Self {
        Self { t, lambda, f, resnorm, dist_b, eta: None, eta_star: None, beta: None, xi: None, contraction: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceEvent {
    /// The iterate left `dist_B < φ` before step `t`.
    BasinExit { t: usize },
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    pub events: Vec<TraceEvent>,
}

/// 17 significant digits; empty for missing values.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt17).unwrap_or_default()
}

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(TRACE_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.t,
                fmt17(r.lambda),
                fmt17(r.f),
                fmt17(r.resnorm),
                opt(r.dist_b),
                opt(r.eta),
                opt(r.eta_star),
                opt(r.beta),
                opt(r.xi),
                opt(r.contraction)
            ));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut t = Trace::default();
        t.records.push(TraceRecord::new(0, 1.0, -1.0, 0.5, None));
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), TRACE_HEADER);
        assert_eq!(lines.next().unwrap(), "0,1.0000000000000000e0,-1.0000000000000000e0,5.0000000000000000e-1,,,,,,");
    }
}
