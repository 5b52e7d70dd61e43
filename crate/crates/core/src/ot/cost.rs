use ndarray::{Array2, ArrayView1, ArrayView2};
use rayon::prelude::*;

use super::CostMatrix;
use crate::error::{Error, Result};

/// Ground cost between two point clouds given as rows.
///
/// Barycenter updates assume the cost is a non-negatively weighted sum of
/// per-coordinate squared differences, so the plan-weighted mean minimizes it.
pub trait PointCost: Sync {
    fn cost(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<CostMatrix>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SqEuclidean;

impl PointCost for SqEuclidean {
    fn cost(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<CostMatrix> {
        cost_sqeuclidean(a, b)
    }
}

/// `first_weight · ‖·‖²` on columns `..split` plus `second_weight · ‖·‖²` on the rest.
#[derive(Debug, Clone, Copy)]
pub struct BlockSqEuclidean {
    pub split: usize,
    pub first_weight: f64,
    pub second_weight: f64,
}

impl PointCost for BlockSqEuclidean {
    fn cost(&self, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<CostMatrix> {
        check_dims(a, b)?;
        if self.split > a.ncols() {
            return Err(Error::Dimension(format!(
                "block split {} beyond point dimension {}",
                self.split,
                a.ncols()
            )));
        }
        if !(self.first_weight >= 0.0 && self.second_weight >= 0.0) {
            return Err(Error::InvalidParameter("block weights must be non-negative".into()));
        }
        let (s, w1, w2) = (self.split, self.first_weight, self.second_weight);
        pairwise(a, b, |x, y| {
            let head = if w1 == 0.0 { 0.0 } else { w1 * sq_dist(&x[..s], &y[..s]) };
            let tail = if w2 == 0.0 { 0.0 } else { w2 * sq_dist(&x[s..], &y[s..]) };
            head + tail
        })
    }
}

fn check_dims(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<()> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "point dimensions differ: {} vs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    Ok(())
}

/// Squared distance accumulated in four independent lanes so the loop vectorizes.
#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let xc = x.chunks_exact(4);
    let yc = y.chunks_exact(4);
    let (xr, yr) = (xc.remainder(), yc.remainder());
    for (p, q) in xc.zip(yc) {
        for k in 0..4 {
            let d = p[k] - q[k];
            acc[k] += d * d;
        }
    }
    let mut tail = 0.0;
    for (p, q) in xr.iter().zip(yr) {
        let d = p - q;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn contiguous_rows(x: ArrayView2<'_, f64>) -> Array2<f64> {
    x.as_standard_layout().into_owned()
}

fn pairwise<F>(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, f: F) -> Result<CostMatrix>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let (m, n) = (a.nrows(), b.nrows());
    let a = contiguous_rows(a);
    let b = contiguous_rows(b);
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let x = a.row(i);
            let x = x.as_slice().expect("standard layout");
            (0..n)
                .map(|j| f(x, b.row(j).as_slice().expect("standard layout")))
                .collect()
        })
        .collect();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    CostMatrix::new(Array2::from_shape_vec((m, n), flat).expect("m × n entries"))
}

/// `C_ij = Σ_t (A_it − B_jt)²`.
pub fn cost_sqeuclidean(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    check_dims(a, b)?;
    pairwise(a, b, sq_dist)
}

/// `C_ij = 0` when the points are identical, 1 otherwise.
pub fn cost_hamming<T: PartialEq>(a: &[T], b: &[T]) -> CostMatrix {
    let values = Array2::from_shape_fn((a.len(), b.len()), |(i, j)| if a[i] == b[j] { 0.0 } else { 1.0 });
    CostMatrix::new(values).expect("0/1 entries are valid costs")
}

/// Hamming cost on real vectors, comparing rows for exact equality.
pub fn cost_hamming_rows(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Result<CostMatrix> {
    check_dims(a, b)?;
    let rows_a: Vec<ArrayView1<'_, f64>> = a.rows().into_iter().collect();
    let rows_b: Vec<ArrayView1<'_, f64>> = b.rows().into_iter().collect();
    Ok(cost_hamming(&rows_a, &rows_b))
}
