use serde::{Deserialize, Serialize};

use super::fairness::DyadicSample;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Checks of the two modelling assumptions behind the fairness bound.
/// Purely descriptive: nothing here fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Share of cross-group pairs in the sample.
    pub p_cross: f64,
    pub p_cross_ci: (f64, f64),
    /// The interval contains ½.
    pub equivalence_holds: bool,
    pub rate_same: Option<f64>,
    pub rate_cross: Option<f64>,
    /// Same-group pairs are predicted as links at least as often.
    pub propensity_holds: Option<bool>,
}

/// Wilson score interval for a binomial proportion.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

pub fn assumption_diagnostics(sample: &DyadicSample) -> Diagnostics {
    let n = sample.len();
    let cross = sample.xor.iter().filter(|&&x| x).count();
    let p_cross = if n == 0 { f64::NAN } else { cross as f64 / n as f64 };
    let ci = wilson_interval(cross, n, Z95);
    let rate_same = sample.positive_rate(false).ok();
    let rate_cross = sample.positive_rate(true).ok();
    Diagnostics {
        p_cross,
        p_cross_ci: ci,
        equivalence_holds: ci.0 <= 0.5 && 0.5 <= ci.1,
        rate_same,
        rate_cross,
        propensity_holds: rate_same.zip(rate_cross).map(|(s, c)| s >= c),
    }
}
