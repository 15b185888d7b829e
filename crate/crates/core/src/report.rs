//! Measured constants, tables and verdicts of an experiment.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Pass only if both pass; fail dominates inconclusive.
    pub fn and(self, other: Verdict) -> Verdict {
        match (self, other) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

pub type Row = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EstimateReport {
    pub experiment: String,
    pub verdict: Verdict,
    pub metrics: BTreeMap<String, f64>,
    pub table: Vec<Row>,
    pub anomalies: Vec<String>,
}

impl EstimateReport {
    pub fn new(experiment: &str) -> Self {
        EstimateReport {
            experiment: experiment.to_string(),
            verdict: Verdict::Inconclusive,
            metrics: BTreeMap::new(),
            table: Vec::new(),
            anomalies: Vec::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) -> &mut Self {
        self.metrics.insert(name.to_string(), value);
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    pub fn row<'a>(&mut self, entries: impl IntoIterator<Item = (&'a str, f64)>) -> &mut Self {
        self.table.push(entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect());
        self
    }

    pub fn anomaly(&mut self, note: impl Into<String>) -> &mut Self {
        self.anomalies.push(note.into());
        self
    }

    /// Column `name` of the table, skipping rows without it.
    pub fn column(&self, name: &str) -> Vec<f64> {
        self.table.iter().filter_map(|r| r.get(name).copied()).collect()
    }
}

/// Least-squares line `y = intercept + slope · x`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len().min(ys.len()) as f64;
    if n < 2.0 {
        return (ys.first().copied().unwrap_or(f64::NAN), f64::NAN);
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}
