//! Regression in the PNS-cylinder space.
//!
//! The circular score is divided by the circle radius to get an angle and
//! fitted either by wrapped least squares or by a von Mises model; the other
//! scores are fitted by ordinary least squares. Predictions go back through
//! the inverse PNS map, are truncated to the orthant and mapped to the
//! simplex.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{circular_frechet_mean, wrap_angle};
use crate::linalg::{design_with_intercept, LeastSquares};
use crate::pns::{PnsModel, ScoreVector};
use crate::simplex::{inverse_power_transform, orthant_truncate, Composition};

const UNWRAP_TOL: f64 = 1e-10;
const UNWRAP_MAX_ITER: usize = 100;
const INTERCEPT_OFFSETS: [f64; 4] = [0.0, FRAC_PI_2, -FRAC_PI_2, PI];
pub const KAPPA_CAP: f64 = 1e6;

fn wrapped_rss(y: &[f64], design: &DMatrix<f64>, beta: &DVector<f64>) -> f64 {
    let fitted = design * beta;
    y.iter()
        .zip(fitted.iter())
        .map(|(yi, fi)| wrap_angle(yi - fi).powi(2))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CircularLsFit {
    /// Intercept first, wrapped to `[-π, π)`.
    pub beta: Vec<f64>,
    pub wrapped_rss: f64,
    pub converged: bool,
}

/// Wrapped least squares: minimises `Σ wrap(y_i - x̃_iᵀβ)²`.
///
/// Each start alternates between unwrapping the responses around the current
/// fit and an ordinary least-squares refit, which never increases the
/// objective. Starts are the raw least-squares fit and a fit to responses
/// unwrapped around their circular mean, each with four intercept offsets.
pub fn fit_circular_ls(y: &[f64], predictors: &[Vec<f64>]) -> Result<CircularLsFit> {
    let design = design_with_intercept(predictors)?;
    check_rows(y.len(), design.nrows())?;
    if design.nrows() <= design.ncols() {
        return Err(Error::TooFewObservations {
            needed: design.ncols(),
            have: design.nrows(),
        });
    }
    let solver = LeastSquares::new(&design)?;
    let y: Vec<f64> = y.iter().map(|v| wrap_angle(*v)).collect();

    let raw = solver.solve(&DVector::from_column_slice(&y));
    let centre = circular_frechet_mean(&y)?;
    let centred = DVector::from_iterator(y.len(), y.iter().map(|v| centre + wrap_angle(v - centre)));
    let around_mean = solver.solve(&centred);

    let mut best: Option<(DVector<f64>, f64, bool)> = None;
    for warm in [raw, around_mean] {
        for offset in INTERCEPT_OFFSETS {
            let mut beta = warm.clone();
            beta[0] += offset;
            let mut converged = false;
            for _ in 0..UNWRAP_MAX_ITER {
                let fitted = &design * &beta;
                let target = DVector::from_iterator(
                    y.len(),
                    y.iter().zip(fitted.iter()).map(|(yi, fi)| fi + wrap_angle(yi - fi)),
                );
                let next = solver.solve(&target);
                let change = (&next - &beta).norm();
                beta = next;
                if change < UNWRAP_TOL {
                    converged = true;
                    break;
                }
            }
            let rss = wrapped_rss(&y, &design, &beta);
            if best.as_ref().is_none_or(|b| rss < b.1) {
                best = Some((beta, rss, converged));
            }
        }
    }
    let (mut beta, wrapped_rss, converged) = best.expect("at least one start");
    beta[0] = wrap_angle(beta[0]);
    if !converged {
        log::warn!("wrapped least squares did not reach a fixed point");
    }
    Ok(CircularLsFit {
        beta: beta.iter().copied().collect(),
        wrapped_rss,
        converged,
    })
}

fn check_rows(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// `I_1(κ) / I_0(κ)`, the mean resultant length of a von Mises distribution.
pub fn bessel_ratio(kappa: f64) -> f64 {
    if kappa <= 0.0 {
        return 0.0;
    }
    if kappa <= 60.0 {
        let h = kappa / 2.0;
        let (mut i0, mut i1) = (0.0, 0.0);
        let (mut t0, mut t1) = (1.0, h);
        for k in 0..400 {
            i0 += t0;
            i1 += t1;
            let kf = k as f64;
            t0 *= h * h / ((kf + 1.0) * (kf + 1.0));
            t1 *= h * h / ((kf + 1.0) * (kf + 2.0));
            if t0 < 1e-17 * i0 && t1 < 1e-17 * i1 {
                break;
            }
        }
        i1 / i0
    } else {
        // Hankel expansions, common factor e^κ / sqrt(2πκ) cancelled
        let z = 1.0 / (8.0 * kappa);
        const C0: [f64; 7] = [1.0, 1.0, 4.5, 37.5, 459.375, 7441.875, 150_077.812_5];
        const C1: [f64; 7] = [1.0, -3.0, -7.5, -52.5, -590.625, -9095.625, -177_364.687_5];
        let poly = |c: &[f64; 7]| c.iter().rev().fold(0.0, |acc, ci| acc * z + ci);
        poly(&C1) / poly(&C0)
    }
}

/// Solves `A_1(κ) = r`, capped at [`KAPPA_CAP`]. Returns `(κ, capped)`.
pub fn kappa_from_resultant(r: f64) -> (f64, bool) {
    if r <= 0.0 {
        return (0.0, false);
    }
    if r >= bessel_ratio(KAPPA_CAP) {
        return (KAPPA_CAP, true);
    }
    let (mut lo, mut hi) = (-20.0_f64, KAPPA_CAP.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if bessel_ratio(mid.exp()) < r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    ((0.5 * (lo + hi)).exp(), false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VonMisesFit {
    pub mu0: f64,
    /// Slopes of the linear predictor, one per predictor (no intercept).
    pub gamma: Vec<f64>,
    pub kappa: f64,
    pub converged: bool,
    pub kappa_capped: bool,
}

impl VonMisesFit {
    /// `μ₀ + 2 atan(xᵀγ)`, wrapped.
    pub fn mean_direction(&self, x: &[f64]) -> f64 {
        let eta: f64 = x.iter().zip(&self.gamma).map(|(a, b)| a * b).sum();
        wrap_angle(self.mu0 + 2.0 * eta.atan())
    }
}

fn cos_fit(y: &[f64], x: &[Vec<f64>], mu0: f64, gamma: &DVector<f64>) -> f64 {
    y.iter()
        .zip(x)
        .map(|(yi, xi)| {
            let eta: f64 = xi.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
            (yi - mu0 - 2.0 * eta.atan()).cos()
        })
        .sum()
}

/// Maximum likelihood for a von Mises response with mean direction
/// `μ₀ + 2 atan(xᵀγ)`.
///
/// The mean parameters maximise `Σ cos(y_i - μ_i)` regardless of κ; they are
/// found by Fisher scoring with step halving, from a null start and from a
/// start matched to the wrapped least-squares slope. κ then solves
/// `A_1(κ) = mean cos(y_i - μ_i)`.
pub fn fit_circular_vonmises(y: &[f64], predictors: &[Vec<f64>]) -> Result<VonMisesFit> {
    let design = design_with_intercept(predictors)?;
    check_rows(y.len(), design.nrows())?;
    let (n, m) = design.shape();
    if n <= m {
        return Err(Error::TooFewObservations { needed: m, have: n });
    }
    let p = m - 1;
    let null_start = (circular_frechet_mean(y)?, DVector::zeros(p));
    let ls = fit_circular_ls(y, predictors)?;
    let ls_start = (ls.beta[0], DVector::from_iterator(p, ls.beta[1..].iter().map(|b| b / 2.0)));

    let mut best: Option<(f64, DVector<f64>, f64, bool)> = None;
    for (mut mu0, mut gamma) in [null_start, ls_start] {
        let mut s = cos_fit(y, predictors, mu0, &gamma);
        let mut converged = false;
        for _ in 0..200 {
            let mut jac = DMatrix::zeros(n, m);
            let mut sines = DVector::zeros(n);
            for (i, xi) in predictors.iter().enumerate() {
                let eta: f64 = xi.iter().zip(gamma.iter()).map(|(a, b)| a * b).sum();
                jac[(i, 0)] = 1.0;
                for j in 0..p {
                    jac[(i, j + 1)] = 2.0 * xi[j] / (1.0 + eta * eta);
                }
                sines[i] = (y[i] - mu0 - 2.0 * eta.atan()).sin();
            }
            let a1 = (s / n as f64).max(0.05);
            let Some(chol) = (jac.transpose() * &jac).cholesky() else {
                break;
            };
            let step = chol.solve(&(jac.transpose() * sines)) / a1;
            let mut t = 1.0;
            let mut improved = false;
            while t > 1e-10 {
                let mu_c = mu0 + t * step[0];
                let g_c = &gamma + step.rows(1, p) * t;
                let s_c = cos_fit(y, predictors, mu_c, &g_c);
                if s_c > s {
                    let gain = s_c - s;
                    mu0 = mu_c;
                    gamma = g_c;
                    s = s_c;
                    improved = true;
                    if gain < 1e-13 * n as f64 {
                        converged = true;
                    }
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                converged = true;
            }
            if converged {
                break;
            }
        }
        if best.as_ref().is_none_or(|b| s > b.2) {
            best = Some((mu0, gamma, s, converged));
        }
    }
    let (mu0, gamma, s, converged) = best.expect("at least one start");
    let (kappa, kappa_capped) = kappa_from_resultant(s / n as f64);
    if kappa_capped {
        log::warn!("von Mises concentration capped at {KAPPA_CAP}");
    }
    Ok(VonMisesFit {
        mu0: wrap_angle(mu0),
        gamma: gamma.iter().copied().collect(),
        kappa,
        converged,
        kappa_capped,
    })
}

/// How the circular score is regressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularMethod {
    #[default]
    WrappedLeastSquares,
    VonMises,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CircularModel {
    WrappedLeastSquares { beta: Vec<f64> },
    VonMises(VonMisesFit),
}

impl CircularModel {
    /// Fitted angle on the final circle, in `[-π, π)`.
    pub fn angle(&self, x: &[f64]) -> f64 {
        match self {
            CircularModel::WrappedLeastSquares { beta } => {
                let lin: f64 = beta[0] + x.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                wrap_angle(lin)
            }
            CircularModel::VonMises(fit) => fit.mean_direction(x),
        }
    }

    fn n_predictors(&self) -> usize {
        match self {
            CircularModel::WrappedLeastSquares { beta } => beta.len() - 1,
            CircularModel::VonMises(fit) => fit.gamma.len(),
        }
    }
}

/// Stage-two regression fitted conditionally on a PNS model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub circular: CircularModel,
    /// Rows for scores `2..=k_used`, each intercept first.
    pub linear: Vec<Vec<f64>>,
    pub k_used: usize,
    /// Residual variance of each modelled score, in score units.
    pub residual_variances: Vec<f64>,
    pub pns: PnsModel,
    #[serde(default = "default_true")]
    pub converged: bool,
}

fn default_true() -> bool {
    true
}

/// Fits the circular score and scores `2..=k_used` against the predictors.
pub fn fit_score_regression(
    scores: &[ScoreVector],
    predictors: &[Vec<f64>],
    k_used: usize,
    pns: &PnsModel,
    method: CircularMethod,
) -> Result<RegressionModel> {
    let d = pns.dim();
    if !(1..=d).contains(&k_used) {
        return Err(Error::OutOfRange(format!("k_used {k_used} outside 1..={d}")));
    }
    check_rows(scores.len(), predictors.len())?;
    if let Some(s) = scores.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: s.len() });
    }
    let design = design_with_intercept(predictors)?;
    let (n, m) = design.shape();
    if n <= m {
        return Err(Error::TooFewObservations { needed: m, have: n });
    }
    let rho = pns.circle_radius();
    let angles: Vec<f64> = scores.iter().map(|s| wrap_angle(s[0] / rho)).collect();
    let dof = (n - m) as f64;

    let (circular, circ_rss, converged) = match method {
        CircularMethod::WrappedLeastSquares => {
            let fit = fit_circular_ls(&angles, predictors)?;
            (
                CircularModel::WrappedLeastSquares { beta: fit.beta },
                fit.wrapped_rss,
                fit.converged,
            )
        }
        CircularMethod::VonMises => {
            let fit = fit_circular_vonmises(&angles, predictors)?;
            let model = CircularModel::VonMises(fit);
            let rss = angles
                .iter()
                .zip(predictors)
                .map(|(a, x)| wrap_angle(a - model.angle(x)).powi(2))
                .sum();
            let converged = matches!(&model, CircularModel::VonMises(f) if f.converged);
            (model, rss, converged)
        }
    };
    let mut residual_variances = vec![rho * rho * circ_rss / dof];

    let solver = LeastSquares::new(&design)?;
    let mut linear = Vec::with_capacity(k_used - 1);
    for j in 1..k_used {
        let y = DVector::from_iterator(n, scores.iter().map(|s| s[j]));
        let b = solver.solve(&y);
        let rss = (&y - &design * &b).norm_squared();
        residual_variances.push(rss / dof);
        linear.push(b.iter().copied().collect());
    }

    Ok(RegressionModel {
        circular,
        linear,
        k_used,
        residual_variances,
        pns: pns.clone(),
        converged,
    })
}

impl RegressionModel {
    pub fn n_predictors(&self) -> usize {
        self.circular.n_predictors()
    }

    /// Predicted score vector; scores beyond `k_used` are zero.
    pub fn predict_scores(&self, x: &[f64]) -> Result<ScoreVector> {
        if x.len() != self.n_predictors() {
            return Err(Error::DimensionMismatch {
                expected: self.n_predictors(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite predictor value".into()));
        }
        let mut scores = vec![0.0; self.pns.dim()];
        // wrap the angle first, then scale onto the circle
        scores[0] = self.pns.circle_radius() * self.circular.angle(x);
        for (j, b) in self.linear.iter().enumerate() {
            scores[j + 1] = b[0] + x.iter().zip(&b[1..]).map(|(a, c)| a * c).sum::<f64>();
        }
        Ok(scores)
    }

    /// Maps the fitted scores at `x` back to the simplex.
    pub fn predict_composition(&self, x: &[f64]) -> Result<Composition> {
        let scores = self.predict_scores(x)?;
        let (point, clamped) = self.pns.scores_to_sphere_clamped(&scores, self.k_used)?;
        if clamped > 0 {
            log::warn!("{clamped} predicted score(s) clamped to the valid lift range");
        }
        inverse_power_transform(&orthant_truncate(&point)?, self.pns.alpha())
    }
}

/// Composition at `x` for a fitted model; see
/// [`RegressionModel::predict_composition`].
pub fn predict_composition(model: &RegressionModel, x: &[f64]) -> Result<Composition> {
    model.predict_composition(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, lo: f64, hi: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![lo + (hi - lo) * i as f64 / (n - 1) as f64])
            .collect()
    }

    #[test]
    fn noise_free_line_recovered() {
        let x = grid(41, -2.0, 2.0);
        let y: Vec<f64> = x.iter().map(|r| wrap_angle(0.3 + r[0])).collect();
        let fit = fit_circular_ls(&y, &x).unwrap();
        assert!((fit.beta[0] - 0.3).abs() < 1e-8);
        assert!((fit.beta[1] - 1.0).abs() < 1e-8);
        assert!(fit.converged);
    }

    #[test]
    fn rank_deficient_design() {
        let x: Vec<Vec<f64>> = (0..10).map(|_| vec![1.0]).collect();
        let y = vec![0.1; 10];
        assert!(matches!(fit_circular_ls(&y, &x), Err(Error::RankDeficient)));
    }

    #[test]
    fn bessel_ratio_is_continuous_at_switch() {
        let below = bessel_ratio(60.0 - 1e-9);
        let above = bessel_ratio(60.0 + 1e-9);
        assert!((below - above).abs() < 1e-11, "{below} vs {above}");
        // reference values of I1/I0
        assert!((bessel_ratio(1.0) - 0.446_389_965_896_534_6).abs() < 1e-13);
        assert!((bessel_ratio(30.0) - 0.983_189_555_365_336).abs() < 1e-12);
        assert!((bessel_ratio(100.0) - 0.994_987_373_005_168_7).abs() < 1e-12);
    }

    #[test]
    fn kappa_inverts_ratio() {
        for k in [0.5, 2.0, 10.0, 45.0, 400.0] {
            let (est, capped) = kappa_from_resultant(bessel_ratio(k));
            assert!(!capped);
            assert!((est - k).abs() / k < 1e-8, "{k} -> {est}");
        }
        assert_eq!(kappa_from_resultant(1.0), (KAPPA_CAP, true));
        assert_eq!(kappa_from_resultant(-0.1), (0.0, false));
    }

    #[test]
    fn vonmises_null_model() {
        let x = grid(50, -1.0, 1.0);
        // angles symmetric about 1.0 and unrelated to x in sign
        let y: Vec<f64> = (0..50).map(|i| 1.0 + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let fit = fit_circular_vonmises(&y, &x).unwrap();
        assert!((fit.mu0 - 1.0).abs() < 1e-3, "{}", fit.mu0);
        assert!(fit.gamma[0].abs() < 1e-2, "{:?}", fit.gamma);
    }
}
