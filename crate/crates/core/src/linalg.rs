//! Small dense helpers shared by the spectral and rotation code.

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// nonincreasing order. Ties keep the backend's original index order, so the
/// output is a pure function of the input.
pub(crate) fn symmetric_eigen(m: ArrayView2<f64>) -> (Vec<f64>, Array2<f64>) {
    let k = m.nrows();
    debug_assert_eq!(k, m.ncols());
    let dm = DMatrix::from_fn(k, k, |i, j| 0.5 * (m[[i, j]] + m[[j, i]]));
    let eig = SymmetricEigen::new(dm);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = Array2::from_shape_fn((k, k), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

pub(crate) fn column_means(x: ArrayView2<f64>) -> Array1<f64> {
    x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()))
}

/// `x - 1 * mean'` as a new matrix.
pub(crate) fn centered(x: ArrayView2<f64>) -> (Array2<f64>, Array1<f64>) {
    let mean = column_means(x);
    let mut c = x.to_owned();
    for mut row in c.rows_mut() {
        row -= &mean;
    }
    (c, mean)
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Sample covariance `x'x / (n - 1)` of an already centered matrix.
pub(crate) fn covariance_of_centered(x: ArrayView2<f64>) -> Array2<f64> {
    let n = x.nrows() as f64;
    x.t().dot(&x) / (n - 1.0)
}

/// Unit vector along the largest-variance direction of `x` after column
/// centering. Falls back to the first coordinate axis for constant data.
pub(crate) fn first_principal_axis(x: ArrayView2<f64>) -> Array1<f64> {
    let (c, _) = centered(x);
    let (n, d) = c.dim();
    if d <= n {
        let cov = covariance_of_centered(c.view());
        symmetric_eigen(cov.view()).1.column(0).to_owned()
    } else {
        let gram = c.dot(&c.t());
        let (_, u) = symmetric_eigen(gram.view());
        let v = c.t().dot(&u.column(0));
        let norm = v.dot(&v).sqrt();
        if norm > 0.0 {
            v / norm
        } else {
            let mut e = Array1::zeros(d);
            e[0] = 1.0;
            e
        }
    }
}
