use ndarray::{concatenate, Axis};

use super::classifier::{train_binary, ClassifierConfig, LinearClassifier};
use super::fairness::DyadicSample;
use crate::embed::{edge_features, Combiner, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::graph::EdgeSplit;

#[derive(Debug, Clone)]
pub struct LinkPrediction {
    pub acc: f64,
    pub sample: DyadicSample,
    pub classifier: LinearClassifier,
}

/// Trains a link classifier on the split's training edges and sampled
/// training non-edges, then scores `test_pos ∪ test_neg`.
pub fn link_prediction_eval(
    e: &EmbeddingMatrix,
    split: &EdgeSplit,
    sensitive: &[usize],
    combiner: Combiner,
    cfg: &ClassifierConfig,
) -> Result<LinkPrediction> {
    if split.train_edges.is_empty() || split.train_neg.is_empty() {
        return Err(Error::InvalidParameter("link prediction needs training edges and non-edges".into()));
    }
    if split.test_pos.is_empty() || split.test_neg.is_empty() {
        return Err(Error::InvalidParameter("link prediction needs non-empty test sets".into()));
    }
    let pos = edge_features(e, &split.train_edges, combiner)?;
    let neg = edge_features(e, &split.train_neg, combiner)?;
    let x = concatenate(Axis(0), &[pos.view(), neg.view()]).expect("same width");
    let y: Vec<bool> = std::iter::repeat_n(true, pos.nrows())
        .chain(std::iter::repeat_n(false, neg.nrows()))
        .collect();
    let classifier = train_binary(x.view(), &y, cfg)?;

    let pairs: Vec<(usize, usize)> = split.test_pos.iter().chain(&split.test_neg).copied().collect();
    let link: Vec<bool> = std::iter::repeat_n(true, split.test_pos.len())
        .chain(std::iter::repeat_n(false, split.test_neg.len()))
        .collect();
    let test = edge_features(e, &pairs, combiner)?;
    let score = classifier.predict_proba(test.view()).to_vec();
    let sample = DyadicSample::new(pairs, sensitive, link, score)?;
    let hits = sample.predicted.iter().zip(&sample.link).filter(|(p, l)| p == l).count();
    Ok(LinkPrediction {
        acc: hits as f64 / sample.len() as f64,
        sample,
        classifier,
    })
}
