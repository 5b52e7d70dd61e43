use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Principal components of a data matrix, rows as samples.
#[derive(Debug, Clone)]
pub struct Pca {
    pub mean: Array1<f64>,
    /// `k × dim`, one orthonormal direction per row, by decreasing variance.
    pub components: Array2<f64>,
    pub explained_variance: Array1<f64>,
    pub explained_variance_ratio: Array1<f64>,
    /// Centered data projected on the components, `n × k`.
    pub projected: Array2<f64>,
}

impl Pca {
    pub fn transform(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        (&x - &self.mean).dot(&self.components.t())
    }

    /// Maps projections back to the original space (without the mean).
    pub fn reconstruct_centered(&self) -> Array2<f64> {
        self.projected.dot(&self.components)
    }
}

/// Projects onto the top `k` eigenvectors of the sample covariance.
///
/// Each component is signed so its largest-magnitude coordinate is positive,
/// which makes the output reproducible across eigen-solver sign choices.
pub fn pca_project(x: ArrayView2<'_, f64>, k: usize) -> Result<Pca> {
    let (n, dim) = x.dim();
    if k > dim {
        return Err(Error::InvalidParameter(format!("cannot keep {k} components of {dim}-dimensional data")));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("no samples to project".into()));
    }
    let mean = x.mean_axis(Axis(0)).expect("non-empty");
    let centered = &x - &mean;
    let cov = centered.t().dot(&centered) / (n.max(2) - 1) as f64;
    let eig = SymmetricEigen::new(DMatrix::from_fn(dim, dim, |i, j| cov[[i, j]]));

    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut components = Array2::<f64>::zeros((k, dim));
    for (r, &c) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(c);
        let pivot = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for t in 0..dim {
            components[[r, t]] = sign * v[t];
        }
    }
    let variances: Vec<f64> = order.iter().map(|&c| eig.eigenvalues[c].max(0.0)).collect();
    let total: f64 = variances.iter().sum();
    let explained_variance = Array1::from_iter(variances.iter().take(k).copied());
    let explained_variance_ratio = if total > 0.0 {
        &explained_variance / total
    } else {
        Array1::zeros(k)
    };
    let projected = centered.dot(&components.t());
    Ok(Pca {
        mean,
        components,
        explained_variance,
        explained_variance_ratio,
        projected,
    })
}
