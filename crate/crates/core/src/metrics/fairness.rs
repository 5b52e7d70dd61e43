//! Dyadic fairness of link predictions: disparate impact, balanced error rate
//! and the enumeration oracle for the smallest achievable balanced error.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scored node pairs with their cross-group indicator and true link status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DyadicSample {
    pub pairs: Vec<(usize, usize)>,
    /// `true` when the endpoints have different sensitive values.
    pub xor: Vec<bool>,
    pub link: Vec<bool>,
    pub predicted: Vec<bool>,
    pub score: Vec<f64>,
}

impl DyadicSample {
    /// Builds a sample, predicting a link when `score >= 0.5`.
    pub fn new(pairs: Vec<(usize, usize)>, sensitive: &[usize], link: Vec<bool>, score: Vec<f64>) -> Result<Self> {
        if link.len() != pairs.len() || score.len() != pairs.len() {
            return Err(Error::Dimension("pairs, labels and scores differ in length".into()));
        }
        let n = sensitive.len();
        let mut xor = Vec::with_capacity(pairs.len());
        for &(u, v) in &pairs {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!("pair ({u}, {v}) out of range for {n} nodes")));
            }
            xor.push(sensitive[u] != sensitive[v]);
        }
        let predicted = score.iter().map(|&s| s >= 0.5).collect();
        Ok(DyadicSample {
            pairs,
            xor,
            link,
            predicted,
            score,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// `(positives, total)` among pairs with the given cross-group indicator.
    fn counts(&self, xor: bool) -> (usize, usize) {
        self.xor
            .iter()
            .zip(&self.predicted)
            .filter(|(&x, _)| x == xor)
            .fold((0, 0), |(p, t), (_, &g)| (p + g as usize, t + 1))
    }

    /// Empirical `P(g = 1 | xor)`.
    pub fn positive_rate(&self, xor: bool) -> Result<f64> {
        let (pos, total) = self.counts(xor);
        if total == 0 {
            let which = if xor { "cross-group" } else { "same-group" };
            return Err(Error::Undefined(format!("no {which} pairs in the sample")));
        }
        Ok(pos as f64 / total as f64)
    }
}

/// `P(g = 1 | xor = 1) / P(g = 1 | xor = 0)`.
pub fn ddi(sample: &DyadicSample) -> Result<f64> {
    let inter = sample.positive_rate(true)?;
    let intra = sample.positive_rate(false)?;
    if intra == 0.0 {
        return Err(Error::Undefined("DDI undefined: no same-group pair predicted as a link".into()));
    }
    Ok(inter / intra)
}

/// `½ [P(g = 0 | xor = 1) + P(g = 1 | xor = 0)]`.
pub fn dber(sample: &DyadicSample) -> Result<f64> {
    let inter = sample.positive_rate(true)?;
    let intra = sample.positive_rate(false)?;
    Ok(0.5 * ((1.0 - inter) + intra))
}

/// Largest support handled by [`min_dber_bruteforce`].
pub const MAX_ENUMERATION_SUPPORT: usize = 20;

/// Smallest `½ [γ1(g = 0) + γ0(g = 1)]` over every deterministic labeling
/// `g` of a shared finite support, found by enumerating all `2^k` labelings.
pub fn min_dber_bruteforce(gamma0: ArrayView1<'_, f64>, gamma1: ArrayView1<'_, f64>) -> Result<f64> {
    let k = gamma0.len();
    if gamma1.len() != k {
        return Err(Error::Dimension(format!(
            "distributions live on supports of size {k} and {}",
            gamma1.len()
        )));
    }
    if k > MAX_ENUMERATION_SUPPORT {
        return Err(Error::InvalidParameter(format!(
            "support of size {k} exceeds the enumeration limit {MAX_ENUMERATION_SUPPORT}"
        )));
    }
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << k) {
        let mut err = 0.0;
        for x in 0..k {
            err += if mask >> x & 1 == 1 { gamma0[x] } else { gamma1[x] };
        }
        best = best.min(0.5 * err);
    }
    Ok(best)
}

/// Joint distributions of `(z_u, z_v)` given `xor = 0` and `xor = 1` when
/// `u` and `v` are drawn independently, each from group 0 with probability
/// `p0` and then from that group's conditional `mu_s`.
pub fn xor_conditional_joints(
    mu0: ArrayView1<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    p0: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if mu0.len() != mu1.len() {
        return Err(Error::Dimension("conditionals on different supports".into()));
    }
    if !(p0 > 0.0 && p0 < 1.0) {
        return Err(Error::InvalidParameter(format!("group probability must be in (0, 1), got {p0}")));
    }
    let p1 = 1.0 - p0;
    let outer = |a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>| -> Array2<f64> {
        let a2 = a.to_owned().insert_axis(ndarray::Axis(1));
        let b2: Array1<f64> = b.to_owned();
        &a2 * &b2
    };
    let same = (outer(mu0, mu0) * (p0 * p0) + outer(mu1, mu1) * (p1 * p1)) / (p0 * p0 + p1 * p1);
    let cross = (outer(mu0, mu1) + outer(mu1, mu0)) * 0.5;
    Ok((same, cross))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn sample(xor: &[bool], predicted: &[bool]) -> DyadicSample {
        DyadicSample {
            pairs: vec![(0, 1); xor.len()],
            xor: xor.to_vec(),
            link: vec![true; xor.len()],
            predicted: predicted.to_vec(),
            score: predicted.iter().map(|&p| if p { 1.0 } else { 0.0 }).collect(),
        }
    }

    fn counts(inter_pos: usize, inter_neg: usize, intra_pos: usize, intra_neg: usize) -> DyadicSample {
        let mut xor = Vec::new();
        let mut pred = Vec::new();
        for (x, p, c) in [
            (true, true, inter_pos),
            (true, false, inter_neg),
            (false, true, intra_pos),
            (false, false, intra_neg),
        ] {
            xor.extend(std::iter::repeat_n(x, c));
            pred.extend(std::iter::repeat_n(p, c));
        }
        sample(&xor, &pred)
    }

    #[test]
    fn ddi_equal_rates_is_one() {
        assert_eq!(ddi(&counts(3, 7, 3, 7)).unwrap(), 1.0);
    }

    #[test]
    fn ddi_hand_ratio() {
        assert_eq!(ddi(&counts(2, 8, 4, 6)).unwrap(), 0.5);
    }

    #[test]
    fn ddi_undefined_cases() {
        assert!(ddi(&counts(2, 8, 0, 10)).is_err());
        assert!(ddi(&counts(0, 0, 1, 1)).is_err());
    }

    #[test]
    fn dber_cases() {
        let xor = [true, true, false, false, true];
        assert_eq!(dber(&sample(&xor, &xor)).unwrap(), 0.0);
        assert_eq!(dber(&sample(&xor, &[true; 5])).unwrap(), 0.5);
        assert_eq!(dber(&counts(4, 6, 3, 7)).unwrap(), 0.5 * (0.6 + 0.3));
    }

    #[test]
    fn sample_thresholds_scores() {
        let s = DyadicSample::new(vec![(0, 1), (0, 2)], &[0, 0, 1], vec![true, false], vec![0.5, 0.49]).unwrap();
        assert_eq!(s.xor, vec![false, true]);
        assert_eq!(s.predicted, vec![true, false]);
        assert!(DyadicSample::new(vec![(0, 9)], &[0, 1], vec![true], vec![1.0]).is_err());
    }

    #[test]
    fn bruteforce_cases() {
        let g = array![0.2, 0.5, 0.3];
        assert_eq!(min_dber_bruteforce(g.view(), g.view()).unwrap(), 0.5);
        assert_eq!(min_dber_bruteforce(array![1.0, 0.0].view(), array![0.0, 1.0].view()).unwrap(), 0.0);
        let v = min_dber_bruteforce(array![0.7, 0.3].view(), array![0.4, 0.6].view()).unwrap();
        assert!((v - 0.35).abs() < 1e-15);
        assert!(min_dber_bruteforce(array![1.0].view(), array![0.5, 0.5].view()).is_err());
    }

    #[test]
    fn aligned_conditionals_give_equal_joints() {
        let mu = array![0.1, 0.6, 0.3];
        let (same, cross) = xor_conditional_joints(mu.view(), mu.view(), 0.3).unwrap();
        assert!((&same - &cross).iter().all(|d| d.abs() < 1e-15));
        let (same, cross) = xor_conditional_joints(array![1.0, 0.0].view(), array![0.0, 1.0].view(), 0.5).unwrap();
        assert_eq!(same, array![[0.5, 0.0], [0.0, 0.5]]);
        assert_eq!(cross, array![[0.0, 0.5], [0.5, 0.0]]);
    }
}
