//! Comparison methods that work on the simplex (or a transform of it)
//! directly: per-component linear and quadratic regression, and regression
//! on the first principal component score.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{canonical_sign, design_with_intercept, sorted_eigen, LeastSquares};
use crate::simplex::{clamp_to_simplex, Composition};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    LinearSimplex,
    QuadraticSimplex,
    PcaScore1,
    ArcsinePcaScore1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaTransform {
    None,
    /// Componentwise `asin(sqrt(x))`.
    Arcsine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub kind: BaselineKind,
    pub n_predictors: usize,
    /// Linear and quadratic: one coefficient row per part over the feature
    /// vector. PCA: a single row regressing the first score.
    pub coefficients: Vec<Vec<f64>>,
    /// PCA centre in the (possibly transformed) space; empty otherwise.
    pub center: Vec<f64>,
    /// First principal axis; empty for non-PCA kinds.
    pub axis: Vec<f64>,
}

fn check_inputs(y: &[Composition], x: &[Vec<f64>]) -> Result<usize> {
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: y.len(),
            found: x.len(),
        });
    }
    let Some(first) = y.first() else {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    };
    let parts = first.len();
    if let Some(c) = y.iter().find(|c| c.len() != parts) {
        return Err(Error::DimensionMismatch {
            expected: parts,
            found: c.len(),
        });
    }
    Ok(parts)
}

fn quadratic_features(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().copied().chain(r.iter().map(|v| v * v)).collect())
        .collect()
}

fn fit_per_component(y: &[Composition], features: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let parts = check_inputs(y, features)?;
    let design = design_with_intercept(features)?;
    let (n, m) = design.shape();
    if n <= m {
        return Err(Error::TooFewObservations { needed: m, have: n });
    }
    let solver = LeastSquares::new(&design)?;
    Ok((0..parts)
        .map(|j| {
            let col = DVector::from_iterator(n, y.iter().map(|c| c.parts()[j]));
            solver.solve(&col).iter().copied().collect()
        })
        .collect())
}

/// Ordinary least squares on each part separately.
pub fn fit_linear_simplex(y: &[Composition], x: &[Vec<f64>]) -> Result<BaselineModel> {
    Ok(BaselineModel {
        kind: BaselineKind::LinearSimplex,
        n_predictors: x.first().map_or(0, Vec::len),
        coefficients: fit_per_component(y, x)?,
        center: Vec::new(),
        axis: Vec::new(),
    })
}

/// Least squares on `(1, x_j, x_j²)` for each part separately.
pub fn fit_quadratic_simplex(y: &[Composition], x: &[Vec<f64>]) -> Result<BaselineModel> {
    Ok(BaselineModel {
        kind: BaselineKind::QuadraticSimplex,
        n_predictors: x.first().map_or(0, Vec::len),
        coefficients: fit_per_component(y, &quadratic_features(x))?,
        center: Vec::new(),
        axis: Vec::new(),
    })
}

fn arcsine(c: &[f64]) -> Vec<f64> {
    c.iter().map(|v| v.sqrt().asin()).collect()
}

/// Regression of the first principal component score, optionally after the
/// arcsine-square-root transform.
pub fn fit_pca_score1(
    y: &[Composition],
    x: &[Vec<f64>],
    transform: PcaTransform,
) -> Result<BaselineModel> {
    let parts = check_inputs(y, x)?;
    let n = y.len();
    let m = x.first().map_or(0, Vec::len) + 1;
    if n <= m.max(parts) {
        return Err(Error::TooFewObservations {
            needed: m.max(parts),
            have: n,
        });
    }
    let rows: Vec<Vec<f64>> = match transform {
        PcaTransform::None => y.iter().map(|c| c.parts().to_vec()).collect(),
        PcaTransform::Arcsine => y.iter().map(|c| arcsine(c.parts())).collect(),
    };
    let data = DMatrix::from_fn(n, parts, |i, j| rows[i][j]);
    let center: DVector<f64> = data.row_mean().transpose();
    let centred = DMatrix::from_fn(n, parts, |i, j| data[(i, j)] - center[j]);
    let cov = centred.transpose() * &centred / (n as f64 - 1.0);
    let (values, vectors) = sorted_eigen(cov);
    if !(values[0] > 1e-15) {
        return Err(Error::Degenerate("responses have zero variance".into()));
    }
    let mut axis = vectors.column(0).into_owned();
    canonical_sign(&mut axis);
    let scores = &centred * &axis;

    let design = design_with_intercept(x)?;
    let coef = LeastSquares::new(&design)?.solve(&scores);
    Ok(BaselineModel {
        kind: match transform {
            PcaTransform::None => BaselineKind::PcaScore1,
            PcaTransform::Arcsine => BaselineKind::ArcsinePcaScore1,
        },
        n_predictors: m - 1,
        coefficients: vec![coef.iter().copied().collect()],
        center: center.iter().copied().collect(),
        axis: axis.iter().copied().collect(),
    })
}

fn dot_features(coef: &[f64], features: &[f64]) -> f64 {
    coef[0] + coef[1..].iter().zip(features).map(|(a, b)| a * b).sum::<f64>()
}

impl BaselineModel {
    fn features(&self, x: &[f64]) -> Vec<f64> {
        match self.kind {
            BaselineKind::QuadraticSimplex => quadratic_features(&[x.to_vec()]).remove(0),
            _ => x.to_vec(),
        }
    }

    /// First principal score of a composition (PCA kinds only).
    pub fn pca_score(&self, c: &Composition) -> Result<f64> {
        let row = match self.kind {
            BaselineKind::PcaScore1 => c.parts().to_vec(),
            BaselineKind::ArcsinePcaScore1 => arcsine(c.parts()),
            _ => return Err(Error::InvalidInput("not a PCA model".into())),
        };
        Ok(row
            .iter()
            .zip(&self.center)
            .zip(&self.axis)
            .map(|((v, c), a)| (v - c) * a)
            .sum())
    }

    /// `center + t · axis` in the PCA space, before any back-transform.
    pub fn pca_reconstruct(&self, t: f64) -> Vec<f64> {
        self.center
            .iter()
            .zip(&self.axis)
            .map(|(c, a)| c + t * a)
            .collect()
    }

    /// Maps a PCA-space reconstruction to a composition.
    pub fn pca_to_composition(&self, t: f64) -> Result<Composition> {
        let z = self.pca_reconstruct(t);
        match self.kind {
            BaselineKind::PcaScore1 => clamp_to_simplex(&z),
            BaselineKind::ArcsinePcaScore1 => {
                let back: Vec<f64> = z
                    .iter()
                    .map(|v| v.clamp(0.0, std::f64::consts::FRAC_PI_2).sin().powi(2))
                    .collect();
                clamp_to_simplex(&back)
            }
            _ => Err(Error::InvalidInput("not a PCA model".into())),
        }
    }

    /// Fitted values before clamping, in the model's response space.
    pub fn predict_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_predictors {
            return Err(Error::DimensionMismatch {
                expected: self.n_predictors,
                found: x.len(),
            });
        }
        let f = self.features(x);
        Ok(match self.kind {
            BaselineKind::LinearSimplex | BaselineKind::QuadraticSimplex => {
                self.coefficients.iter().map(|c| dot_features(c, &f)).collect()
            }
            BaselineKind::PcaScore1 | BaselineKind::ArcsinePcaScore1 => {
                self.pca_reconstruct(dot_features(&self.coefficients[0], &f))
            }
        })
    }

    /// Prediction clamped to the simplex.
    pub fn predict(&self, x: &[f64]) -> Result<Composition> {
        match self.kind {
            BaselineKind::LinearSimplex | BaselineKind::QuadraticSimplex => {
                clamp_to_simplex(&self.predict_raw(x)?)
            }
            BaselineKind::PcaScore1 | BaselineKind::ArcsinePcaScore1 => {
                if x.len() != self.n_predictors {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_predictors,
                        found: x.len(),
                    });
                }
                let t = dot_features(&self.coefficients[0], &self.features(x));
                self.pca_to_composition(t)
            }
        }
    }
}
