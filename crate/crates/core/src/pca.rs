//! Principal component projection via symmetric eigen-decomposition.
//!
//! The smaller of the two Gram forms is decomposed: the `cols × cols`
//! scatter matrix when there are fewer features than rows, otherwise the
//! `rows × rows` inner-product matrix.

use nalgebra::{DMatrix, SymmetricEigen};

#[derive(Clone, Debug, PartialEq)]
pub struct Pca {
    pub dims: usize,
    pub features: usize,
    /// Per-row projections, `rows × dims`.
    pub scores: Vec<f64>,
    /// Unit principal axes, `dims × features`, largest variance first.
    pub basis: Vec<f64>,
    /// Column means that were subtracted (zeros when uncentered).
    pub mean: Vec<f64>,
    /// Variance along each axis (scatter eigenvalue / (rows - 1)).
    pub variances: Vec<f64>,
    /// Number of axes with non-negligible variance; later axes are zero padding.
    pub rank: usize,
}

const RANK_TOLERANCE: f64 = 1e-10;

/// Projects the rows of the row-major `rows × cols` matrix `data` onto its
/// top `dims` principal axes.
pub fn fit(data: &[f64], rows: usize, cols: usize, dims: usize, center: bool) -> Pca {
    assert_eq!(data.len(), rows * cols);
    let mut mean = vec![0.0; cols];
    if center && rows > 0 {
        for row in data.chunks_exact(cols) {
            for (m, x) in mean.iter_mut().zip(row) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= rows as f64);
    }
    let x = DMatrix::from_fn(rows, cols, |i, j| data[i * cols + j] - mean[j]);

    let use_scatter = cols <= rows;
    let gram = if use_scatter {
        x.transpose() * &x
    } else {
        &x * x.transpose()
    };
    let eigen = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..eigen.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]).then(a.cmp(&b)));

    let top = eigen.eigenvalues[order.first().copied().unwrap_or(0)].max(0.0);
    let mut basis = vec![0.0; dims * cols];
    let mut variances = vec![0.0; dims];
    let mut rank = 0;
    for (c, &idx) in order.iter().take(dims).enumerate() {
        let lambda = eigen.eigenvalues[idx];
        if !(lambda > RANK_TOLERANCE * top.max(1.0)) {
            break;
        }
        let axis: Vec<f64> = if use_scatter {
            eigen.eigenvectors.column(idx).iter().copied().collect()
        } else {
            // w = Xᵀu / sqrt(λ)
            let u = eigen.eigenvectors.column(idx);
            let w = x.transpose() * u;
            w.iter().map(|v| v / lambda.sqrt()).collect()
        };
        // sign: largest-magnitude coordinate positive
        let pivot = axis
            .iter()
            .enumerate()
            .fold(0, |best, (i, v)| if v.abs() > axis[best].abs() { i } else { best });
        let sign = if axis[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (b, a) in basis[c * cols..(c + 1) * cols].iter_mut().zip(&axis) {
            *b = sign * a;
        }
        variances[c] = lambda / (rows.saturating_sub(1).max(1)) as f64;
        rank += 1;
    }
    if rank < dims {
        log::warn!("data rank {rank} is below the requested {dims} components; padding with zeros");
    }

    let mut scores = vec![0.0; rows * dims];
    for i in 0..rows {
        for c in 0..rank {
            let axis = &basis[c * cols..(c + 1) * cols];
            scores[i * dims + c] = (0..cols).map(|j| x[(i, j)] * axis[j]).sum();
        }
    }
    Pca {
        dims,
        features: cols,
        scores,
        basis,
        mean,
        variances,
        rank,
    }
}

impl Pca {
    /// Maps projections back to feature space.
    pub fn reconstruct(&self, row_scores: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (c, s) in row_scores.iter().enumerate() {
            let axis = &self.basis[c * self.features..(c + 1) * self.features];
            for (o, a) in out.iter_mut().zip(axis) {
                *o += s * a;
            }
        }
        out
    }
}
