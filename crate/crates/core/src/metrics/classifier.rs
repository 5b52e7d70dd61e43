//! L2-regularized logistic regression trained by full-batch accelerated
//! gradient descent.
//!
//! Features are centered and divided by one global scale (not per column), so
//! an orthogonal rotation of the inputs rotates the solution and leaves every
//! prediction unchanged. More than two classes are handled one-vs-rest.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub l2: f64,
    pub max_iter: usize,
    /// Stop when the gradient norm falls below this.
    pub tol: f64,
    /// Weight samples inversely to their class frequency.
    pub balanced: bool,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            l2: 1e-4,
            max_iter: 1000,
            tol: 1e-6,
            balanced: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingInfo {
    pub iterations: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogistic {
    /// Weights in the standardized space.
    pub weights: Array1<f64>,
    pub bias: f64,
    pub mean: Array1<f64>,
    pub scale: f64,
    pub info: TrainingInfo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub classes: Vec<usize>,
    /// One model for two classes (scoring `classes[1]`), one per class otherwise.
    pub models: Vec<BinaryLogistic>,
    pub config: ClassifierConfig,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Weighted mean log-loss plus `l2/2 · ‖w‖²` (bias unpenalized) and its gradient.
///
/// `params` holds the weights followed by the bias; `y` is 0/1.
pub fn loss_and_gradient(
    params: ArrayView1<'_, f64>,
    x: ArrayView2<'_, f64>,
    y: ArrayView1<'_, f64>,
    sample_weight: ArrayView1<'_, f64>,
    l2: f64,
) -> (f64, Array1<f64>) {
    let d = x.ncols();
    let w = params.slice(ndarray::s![..d]);
    let b = params[d];
    let z = x.dot(&w) + b;
    let total_w: f64 = sample_weight.sum();
    let mut loss = 0.0;
    let mut resid = Array1::<f64>::zeros(z.len());
    for i in 0..z.len() {
        loss += sample_weight[i] * (log1p_exp(z[i]) - y[i] * z[i]);
        resid[i] = sample_weight[i] * (sigmoid(z[i]) - y[i]) / total_w;
    }
    loss = loss / total_w + 0.5 * l2 * w.dot(&w);
    let mut grad = Array1::<f64>::zeros(d + 1);
    grad.slice_mut(ndarray::s![..d]).assign(&(x.t().dot(&resid) + &w * l2));
    grad[d] = resid.sum();
    (loss, grad)
}

fn standardize(x: ArrayView2<'_, f64>) -> (Array1<f64>, f64) {
    let mean = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let centered = &x - &mean;
    let ms = centered.iter().map(|v| v * v).sum::<f64>() / (x.nrows().max(1) * x.ncols().max(1)) as f64;
    let scale = if ms > 0.0 { ms.sqrt() } else { 1.0 };
    (mean, scale)
}

/// Upper estimate of the gradient's Lipschitz constant: a power-iteration
/// estimate of `λ_max(Xᵀ W X) / 4` with headroom, capped by the trace bound.
fn lipschitz(x: ArrayView2<'_, f64>, sw: ArrayView1<'_, f64>, l2: f64) -> f64 {
    let total: f64 = sw.sum();
    let d = x.ncols() + 1;
    let apply = |v: &Array1<f64>| -> Array1<f64> {
        let xv = x.dot(&v.slice(ndarray::s![..d - 1])) + v[d - 1];
        let wxv = &xv * &sw / total;
        let mut out = Array1::zeros(d);
        out.slice_mut(ndarray::s![..d - 1]).assign(&x.t().dot(&wxv));
        out[d - 1] = wxv.sum();
        out
    };
    let mut v = Array1::from_elem(d, 1.0 / (d as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..30 {
        let av = apply(&v);
        let norm = av.dot(&av).sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm;
        v = av / norm;
    }
    let trace: f64 = x
        .rows()
        .into_iter()
        .zip(sw.iter())
        .map(|(r, w)| w * (r.dot(&r) + 1.0))
        .sum::<f64>()
        / total;
    0.25 * (1.5 * lambda).min(trace).max(1e-12) + l2
}

fn fit_binary(x: ArrayView2<'_, f64>, y: ArrayView1<'_, f64>, cfg: &ClassifierConfig) -> BinaryLogistic {
    let (mean, scale) = standardize(x);
    let xs = (&x - &mean) / scale;
    let n = y.len();
    let sw: Array1<f64> = if cfg.balanced {
        let pos = y.sum();
        let neg = n as f64 - pos;
        y.mapv(|l| if l > 0.5 { n as f64 / (2.0 * pos) } else { n as f64 / (2.0 * neg) })
    } else {
        Array1::ones(n)
    };
    let step = 1.0 / lipschitz(xs.view(), sw.view(), cfg.l2);
    let d = x.ncols();
    let mut params = Array1::<f64>::zeros(d + 1);
    let mut momentum = params.clone();
    let mut t = 1.0f64;
    let (mut loss, _) = loss_and_gradient(params.view(), xs.view(), y, sw.view(), cfg.l2);
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let (_, g) = loss_and_gradient(momentum.view(), xs.view(), y, sw.view(), cfg.l2);
        let next = &momentum - &(&g * step);
        let (next_loss, next_grad) = loss_and_gradient(next.view(), xs.view(), y, sw.view(), cfg.l2);
        if next_loss > loss {
            // restart acceleration from the last accepted point
            momentum = params.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        momentum = &next + &((&next - &params) * ((t - 1.0) / t_next));
        params = next;
        t = t_next;
        loss = next_loss;
        if next_grad.dot(&next_grad).sqrt() < cfg.tol {
            break;
        }
    }
    BinaryLogistic {
        weights: params.slice(ndarray::s![..d]).to_owned(),
        bias: params[d],
        mean,
        scale,
        info: TrainingInfo { iterations, loss },
    }
}

impl BinaryLogistic {
    pub fn decision(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        ((&x - &self.mean) / self.scale).dot(&self.weights) + self.bias
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.decision(x).mapv(sigmoid)
    }
}

impl LinearClassifier {
    /// Probability of `classes[1]`; only meaningful for two classes.
    pub fn predict_proba(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.models[0].predict_proba(x)
    }

    /// Hard labels: probability `>= 0.5` for two classes, the highest
    /// one-vs-rest score otherwise.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        if self.classes.len() == 2 {
            return self
                .predict_proba(x)
                .iter()
                .map(|&p| self.classes[(p >= 0.5) as usize])
                .collect();
        }
        let scores: Vec<Array1<f64>> = self.models.iter().map(|m| m.decision(x)).collect();
        (0..x.nrows())
            .map(|i| {
                let best = (0..scores.len())
                    .max_by(|&a, &b| scores[a][i].total_cmp(&scores[b][i]).then(b.cmp(&a)))
                    .expect("at least two classes");
                self.classes[best]
            })
            .collect()
    }

    pub fn accuracy(&self, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
        let pred = self.predict(x);
        let hits = pred.iter().zip(y).filter(|(p, t)| p == t).count();
        hits as f64 / y.len().max(1) as f64
    }
}

pub fn train_classifier(x: ArrayView2<'_, f64>, y: &[usize], cfg: &ClassifierConfig) -> Result<LinearClassifier> {
    if x.nrows() != y.len() {
        return Err(Error::Dimension(format!("{} feature rows for {} labels", x.nrows(), y.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite feature".into()));
    }
    let mut classes = y.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::InvalidParameter("classifier needs at least two classes".into()));
    }
    let targets: Vec<usize> = if classes.len() == 2 { vec![classes[1]] } else { classes.clone() };
    let models = targets
        .iter()
        .map(|&c| {
            let yb = Array1::from_iter(y.iter().map(|&l| if l == c { 1.0 } else { 0.0 }));
            fit_binary(x, yb.view(), cfg)
        })
        .collect();
    Ok(LinearClassifier {
        classes,
        models,
        config: *cfg,
    })
}

/// Convenience wrapper for 0/1 labels given as booleans.
pub fn train_binary(x: ArrayView2<'_, f64>, y: &[bool], cfg: &ClassifierConfig) -> Result<LinearClassifier> {
    let labels: Vec<usize> = y.iter().map(|&b| b as usize).collect();
    train_classifier(x, &labels, cfg)
}

/// Standardized copy of `x` as seen by a model trained on `x` itself.
pub fn standardized(x: ArrayView2<'_, f64>) -> Array2<f64> {
    let (mean, scale) = standardize(x);
    (&x - &mean) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn separable_blobs() {
        let x = array![[0.0, 0.1], [0.2, -0.1], [-0.1, 0.0], [3.0, 3.1], [2.9, 3.2], [3.2, 2.8]];
        let y = [0, 0, 0, 1, 1, 1];
        let clf = train_classifier(x.view(), &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(clf.accuracy(x.view(), &y), 1.0);
    }

    #[test]
    fn identical_features_give_majority_rate() {
        let x = Array2::from_elem((10, 3), 1.5);
        let y = [1, 1, 1, 0, 1, 1, 0, 1, 1, 0];
        let clf = train_classifier(x.view(), &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(clf.predict(x.view()), vec![1; 10]);
        assert_eq!(clf.accuracy(x.view(), &y), 0.7);
    }

    #[test]
    fn single_class_rejected() {
        let x = array![[1.0], [2.0]];
        assert!(train_classifier(x.view(), &[3, 3], &ClassifierConfig::default()).is_err());
    }

    #[test]
    fn three_classes_one_vs_rest() {
        let x = array![[0.0, 0.0], [0.1, 0.2], [5.0, 0.0], [5.2, 0.1], [0.0, 5.0], [0.2, 5.1]];
        let y = [4, 4, 7, 7, 9, 9];
        let clf = train_classifier(x.view(), &y, &ClassifierConfig::default()).unwrap();
        assert_eq!(clf.models.len(), 3);
        assert_eq!(clf.predict(x.view()), y.to_vec());
    }

    #[test]
    fn gradient_of_simple_case() {
        let x = array![[1.0], [-1.0]];
        let y = array![1.0, 0.0];
        let sw = array![1.0, 1.0];
        let (loss, g) = loss_and_gradient(array![0.0, 0.0].view(), x.view(), y.view(), sw.view(), 0.0);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(g, array![-0.5, 0.0]);
    }
}
