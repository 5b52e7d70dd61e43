//! How much of the sensitive attribute a linear probe can read back from
//! node embeddings (representation bias) and from pair embeddings (dyadic RB).

use std::collections::BTreeMap;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::classifier::{train_classifier, ClassifierConfig};
use crate::embed::{edge_features, Combiner, EmbeddingMatrix};
use crate::error::{Error, Result};

/// Fraction of each class used for training in held-out evaluations.
pub const TRAIN_FRACTION: f64 = 0.7;

/// Per-class shuffled split keeping `round(train_fraction · n_c)` members of
/// every class for training and at least one on each side.
pub fn stratified_split(labels: &[usize], train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("train fraction must be in (0, 1), got {train_fraction}")));
    }
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        by_class.entry(l).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut members) in by_class {
        if members.len() < 2 {
            return Err(Error::InvalidParameter(format!("class {class} has fewer than two members")));
        }
        members.shuffle(&mut rng);
        let k = ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train.extend_from_slice(&members[..k]);
        test.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Held-out accuracy of predicting each node's sensitive value from its embedding.
pub fn representation_bias(
    e: &EmbeddingMatrix,
    sensitive: &[usize],
    train_fraction: f64,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<f64> {
    if sensitive.len() != e.n_nodes() {
        return Err(Error::Dimension(format!(
            "{} sensitive values for {} embeddings",
            sensitive.len(),
            e.n_nodes()
        )));
    }
    let (train, test) = stratified_split(sensitive, train_fraction, seed)?;
    let pick = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| sensitive[i]).collect() };
    let clf = train_classifier(e.vectors.select(Axis(0), &train).view(), &pick(&train), cfg)?;
    Ok(clf.accuracy(e.vectors.select(Axis(0), &test).view(), &pick(&test)))
}

/// Group-weighted held-out accuracy of predicting a binary pair label.
///
/// `Σ_s (|E_s| / |E|) · accuracy on the held-out members of E_s`. The probe
/// is trained with balanced class weights so the minority group is not
/// ignored.
pub fn dyadic_rb_from_features(
    features: ArrayView2<'_, f64>,
    labels: &[bool],
    train_fraction: f64,
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<f64> {
    let y: Vec<usize> = labels.iter().map(|&b| b as usize).collect();
    let n_cross = y.iter().sum::<usize>();
    if n_cross == 0 || n_cross == y.len() {
        return Err(Error::Undefined("both same-group and cross-group edges are needed".into()));
    }
    let (train, test) = stratified_split(&y, train_fraction, seed)?;
    let cfg = ClassifierConfig { balanced: true, ..*cfg };
    let pick = |idx: &[usize]| -> Vec<usize> { idx.iter().map(|&i| y[i]).collect() };
    let clf = train_classifier(features.select(Axis(0), &train).view(), &pick(&train), &cfg)?;
    let pred = clf.predict(features.select(Axis(0), &test).view());
    let mut score = 0.0;
    for s in [0usize, 1] {
        let share = y.iter().filter(|&&l| l == s).count() as f64 / y.len() as f64;
        let members: Vec<usize> = (0..test.len()).filter(|&r| y[test[r]] == s).collect();
        let hits = members.iter().filter(|&&r| pred[r] == s).count();
        score += share * hits as f64 / members.len() as f64;
    }
    Ok(score)
}

/// Dyadic RB on concatenated pair embeddings of `edges`, labeled by whether
/// the endpoints belong to different sensitive groups.
pub fn dyadic_rb(
    e: &EmbeddingMatrix,
    edges: &[(usize, usize)],
    sensitive: &[usize],
    seed: u64,
    cfg: &ClassifierConfig,
) -> Result<f64> {
    let features = edge_features(e, edges, Combiner::Concat)?;
    let labels: Vec<bool> = edges.iter().map(|&(u, v)| sensitive[u] != sensitive[v]).collect();
    dyadic_rb_from_features(features.view(), &labels, TRAIN_FRACTION, seed, cfg)
}
