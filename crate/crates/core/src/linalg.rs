//! Small dense least-squares helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative threshold on the diagonal of R below which a design is treated as
/// rank deficient.
const RANK_TOL: f64 = 1e-10;

/// Thin-QR least-squares solver for a fixed design, reusable across responses.
pub(crate) struct LeastSquares {
    q: DMatrix<f64>,
    r: DMatrix<f64>,
}

impl LeastSquares {
    pub(crate) fn new(design: &DMatrix<f64>) -> Result<Self> {
        let (n, m) = design.shape();
        if n < m {
            return Err(Error::TooFewObservations { needed: m - 1, have: n });
        }
        let qr = design.clone().qr();
        let (q, r) = (qr.q(), qr.r());
        let scale = (0..m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if scale == 0.0 || (0..m).any(|i| r[(i, i)].abs() <= RANK_TOL * scale) {
            return Err(Error::RankDeficient);
        }
        Ok(Self { q, r })
    }

    pub(crate) fn solve(&self, y: &DVector<f64>) -> DVector<f64> {
        let qty = self.q.transpose() * y;
        self.r
            .solve_upper_triangular(&qty)
            .expect("triangular factor checked for full rank")
    }
}

/// Design matrix with a leading column of ones.
pub(crate) fn design_with_intercept(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let p = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: bad.len(),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite predictor value".into()));
    }
    Ok(DMatrix::from_fn(rows.len(), p + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            rows[i][j - 1]
        }
    }))
}

/// Eigen-decomposition with eigenvalues sorted in decreasing order.
pub(crate) fn sorted_eigen(m: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(m);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Fixes the sign of a direction so its largest-magnitude entry is positive.
pub(crate) fn canonical_sign(v: &mut DVector<f64>) {
    let idx = v.iamax();
    if v[idx] < 0.0 {
        v.neg_mut();
    }
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with `n - 1` in the denominator.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
        let x = design_with_intercept(&rows).unwrap();
        let y = DVector::from_iterator(5, (0..5).map(|i| 2.0 + 3.0 * i as f64));
        let b = LeastSquares::new(&x).unwrap().solve(&y);
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_design_rejected() {
        let rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        let x = design_with_intercept(&rows).unwrap();
        assert!(matches!(LeastSquares::new(&x), Err(Error::RankDeficient)));
    }

    #[test]
    fn ragged_rows_rejected() {
        assert!(design_with_intercept(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }
}
