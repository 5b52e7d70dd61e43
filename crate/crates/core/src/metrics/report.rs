use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::diagnostics::Diagnostics;
use super::fairness::{min_dber_bruteforce, DyadicSample};
use crate::error::{Error, Result};

/// Number of score bins used for the min-DBER bound.
pub const SCORE_BINS: usize = 10;

/// Fairness and utility scores of one pipeline run on one seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub seed: u64,
    pub acc: f64,
    /// `None` when no same-group test pair is predicted as a link.
    pub ddi: Option<f64>,
    /// `None` when the test pairs miss one of the two XOR groups.
    pub dber: Option<f64>,
    pub rb: f64,
    pub dyadic_rb: f64,
    pub assortativity: f64,
    pub assortativity_degenerate: bool,
    /// Smallest DBER of any predictor that only sees the binned link score.
    pub min_dber_bound: Option<f64>,
    pub diagnostics: Diagnostics,
}

pub const CSV_COLUMNS: [&str; 8] = [
    "seed",
    "acc",
    "ddi",
    "dber",
    "rb",
    "dyadic_rb",
    "assortativity",
    "min_dber_bound",
];

impl MetricsReport {
    pub fn csv_header() -> String {
        CSV_COLUMNS.join(",")
    }

    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.seed,
            self.acc,
            opt(self.ddi),
            opt(self.dber),
            self.rb,
            self.dyadic_rb,
            self.assortativity,
            opt(self.min_dber_bound)
        )
    }
}

/// Conditional distributions of the binned score given `xor = 0` and
/// `xor = 1`, then the enumeration oracle over the bins. Undefined when one
/// of the two XOR groups is absent.
pub fn min_dber_bound(sample: &DyadicSample) -> Result<f64> {
    let mut hist = [Array1::<f64>::zeros(SCORE_BINS), Array1::<f64>::zeros(SCORE_BINS)];
    for (&x, &s) in sample.xor.iter().zip(&sample.score) {
        let bin = ((s * SCORE_BINS as f64) as usize).min(SCORE_BINS - 1);
        hist[x as usize][bin] += 1.0;
    }
    for (x, h) in hist.iter_mut().enumerate() {
        let total = h.sum();
        if total == 0.0 {
            let which = if x == 1 { "cross-group" } else { "same-group" };
            return Err(Error::Undefined(format!("no {which} pairs in the sample")));
        }
        *h /= total;
    }
    min_dber_bruteforce(hist[0].view(), hist[1].view())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
    pub n: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Some(Summary { mean, std: var.sqrt(), n })
    }
}

/// Mean and sample standard deviation of every metric over seeds. Seeds with
/// an undefined DDI or DBER are left out of that column only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub acc: Option<Summary>,
    pub ddi: Option<Summary>,
    pub dber: Option<Summary>,
    pub rb: Option<Summary>,
    pub dyadic_rb: Option<Summary>,
    pub assortativity: Option<Summary>,
    pub min_dber_bound: Option<Summary>,
}

pub fn aggregate(reports: &[MetricsReport]) -> AggregateReport {
    let col = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Option<Summary> {
        Summary::of(&reports.iter().filter_map(f).collect::<Vec<_>>())
    };
    AggregateReport {
        acc: col(&|r| Some(r.acc)),
        ddi: col(&|r| r.ddi),
        dber: col(&|r| r.dber),
        rb: col(&|r| Some(r.rb)),
        dyadic_rb: col(&|r| Some(r.dyadic_rb)),
        assortativity: col(&|r| Some(r.assortativity)),
        min_dber_bound: col(&|r| r.min_dber_bound),
    }
}
