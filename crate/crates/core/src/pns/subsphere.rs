//! Least-squares subsphere fitting and great/small selection.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{dist_unchecked, rotation_to_pole, SphereKind, SpherePoint, Subsphere};
use crate::linalg::sorted_eigen;

const MAX_ITERATIONS: usize = 200;
const MIN_DECREASE: f64 = 1e-12;
const MIN_ANGLE: f64 = 1e-15;
/// Two-sided 5% normal quantile.
const Z_CRIT: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq)]
pub struct SubsphereFit {
    pub subsphere: Subsphere,
    /// `d(x_i, axis) - angle` for every input point.
    pub residuals: Vec<f64>,
    pub rss: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Rule for choosing between a great and a small subsphere at each level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    #[default]
    Bic,
    VarianceTest,
    ForcedGreat,
    ForcedSmall,
}

/// Information criterion values for one level; lower is better.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BicPair {
    pub great: f64,
    pub small: f64,
}

pub fn bic_values(rss_great: f64, rss_small: f64, n: usize, m: usize) -> BicPair {
    let nf = n as f64;
    let term = |rss: f64| nf * (rss / nf).max(f64::MIN_POSITIVE).ln();
    BicPair {
        great: term(rss_great) + m as f64 * nf.ln(),
        small: term(rss_small) + (m + 1) as f64 * nf.ln(),
    }
}

/// Chooses the subsphere kind from the residuals of both fits on `n` points
/// of `S^m`.
pub fn select_sphere_kind(
    residuals_great: &[f64],
    residuals_small: &[f64],
    m: usize,
    method: Selection,
) -> Result<SphereKind> {
    let n = residuals_great.len();
    if n != residuals_small.len() {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: residuals_small.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewObservations { needed: 1, have: n });
    }
    let rss = |r: &[f64]| r.iter().map(|e| e * e).sum::<f64>();
    let (rss_g, rss_s) = (rss(residuals_great), rss(residuals_small));
    match method {
        Selection::ForcedGreat => return Ok(SphereKind::Great),
        Selection::ForcedSmall => return Ok(SphereKind::Small),
        _ => {}
    }
    if rss_g / n as f64 <= 1e-30 {
        return Ok(SphereKind::Great);
    }
    let small = match method {
        Selection::ForcedGreat | Selection::ForcedSmall => unreachable!(),
        Selection::Bic => {
            let bic = bic_values(rss_g, rss_s, n, m);
            bic.small < bic.great
        }
        Selection::VarianceTest => {
            let nf = n as f64;
            let mean = residuals_great.iter().sum::<f64>() / nf;
            let var = residuals_great
                .iter()
                .map(|e| (e - mean).powi(2))
                .sum::<f64>()
                / (nf - 1.0);
            if var <= 0.0 {
                false
            } else {
                let z = mean / (var / nf).sqrt();
                z.abs() > Z_CRIT && rss_s < rss_g
            }
        }
    };
    Ok(if small {
        SphereKind::Small
    } else {
        SphereKind::Great
    })
}

struct Problem<'a> {
    points: &'a [SpherePoint],
    kind: SphereKind,
}

impl Problem<'_> {
    fn distances(&self, v: &[f64]) -> Vec<f64> {
        self.points
            .iter()
            .map(|x| dist_unchecked(x.coords(), v))
            .collect()
    }

    fn radius(&self, dists: &[f64]) -> f64 {
        match self.kind {
            SphereKind::Great => FRAC_PI_2,
            SphereKind::Small => dists.iter().sum::<f64>() / dists.len() as f64,
        }
    }

    fn objective(&self, v: &[f64]) -> f64 {
        let d = self.distances(v);
        let r = self.radius(&d);
        d.iter().map(|di| (di - r).powi(2)).sum()
    }

    /// Residual vector and its Jacobian in the tangent basis `basis` at `v`.
    fn linearize(&self, v: &DVector<f64>, basis: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.points.len();
        let m = basis.ncols();
        let vs = v.as_slice();
        let d = self.distances(vs);
        let r = self.radius(&d);
        let mut jac = DMatrix::zeros(n, m);
        for (i, x) in self.points.iter().enumerate() {
            let s = d[i].sin();
            if s < 1e-12 {
                continue;
            }
            let c = d[i].cos();
            let grad = DVector::from_iterator(
                v.len(),
                x.coords().iter().zip(vs).map(|(xi, vi)| -(xi - c * vi) / s),
            );
            let row = basis.transpose() * grad;
            jac.row_mut(i).copy_from(&row.transpose());
        }
        if self.kind == SphereKind::Small {
            let mean = jac.row_mean();
            for mut row in jac.row_iter_mut() {
                row -= &mean;
            }
        }
        let res = DVector::from_iterator(n, d.iter().map(|di| di - r));
        (res, jac)
    }

    /// Damped Gauss-Newton on the sphere from `start`.
    fn refine(&self, start: DVector<f64>) -> (DVector<f64>, f64, bool, usize) {
        let mut v = start.normalize();
        let mut f = self.objective(v.as_slice());
        let mut lambda = 1e-3;
        for iter in 1..=MAX_ITERATIONS {
            let rot = rotation_to_pole(
                &SpherePoint::from_dvector(v.clone()).expect("iterate is a unit vector"),
            );
            let m = v.len() - 1;
            let basis = rot.transpose().columns(0, m).into_owned();
            let (res, jac) = self.linearize(&v, &basis);
            let jtj = jac.transpose() * &jac;
            let grad = jac.transpose() * &res;
            if grad.norm() < 1e-15 {
                return (v, f, true, iter);
            }
            let mut accepted = None;
            while lambda < 1e12 {
                let mut a = jtj.clone();
                for k in 0..m {
                    a[(k, k)] += lambda * (1.0 + jtj[(k, k)]);
                }
                let Some(step) = a.cholesky().map(|c| c.solve(&(-&grad))) else {
                    lambda *= 10.0;
                    continue;
                };
                let len = step.norm();
                if !len.is_finite() || len == 0.0 {
                    break;
                }
                let t = len.min(FRAC_PI_2);
                let dir = &basis * (&step / len);
                let cand = (&v * t.cos() + dir * t.sin()).normalize();
                let fc = self.objective(cand.as_slice());
                if fc < f {
                    accepted = Some((cand, fc));
                    lambda = (lambda * 0.1).max(1e-12);
                    break;
                }
                lambda *= 10.0;
            }
            match accepted {
                Some((cand, fc)) => {
                    let decrease = f - fc;
                    v = cand;
                    f = fc;
                    if decrease < MIN_DECREASE {
                        return (v, f, true, iter);
                    }
                }
                // no damping level improves the objective: a stationary point
                None => return (v, f, true, iter),
            }
        }
        (v, f, false, MAX_ITERATIONS)
    }
}

fn initial_axes(points: &[SpherePoint], kind: SphereKind) -> Vec<DVector<f64>> {
    let n = points.len();
    let dim = points[0].len();
    let data = DMatrix::from_fn(n, dim, |i, j| points[i].coords()[j]);
    let mean: DVector<f64> = data.row_mean().transpose();

    let smallest = |moment: DMatrix<f64>| {
        let (_, vecs) = sorted_eigen(moment);
        vecs.column(dim - 1).into_owned()
    };
    let mut starts = vec![smallest(data.transpose() * &data)];
    if kind == SphereKind::Small {
        if mean.norm() > 1e-12 {
            starts.push(mean.normalize());
        }
        let centered = DMatrix::from_fn(n, dim, |i, j| data[(i, j)] - mean[j]);
        let mut normal = smallest(centered.transpose() * centered);
        if normal.dot(&mean) < 0.0 {
            normal.neg_mut();
        }
        starts.push(normal);
    }
    starts
}

/// Least-squares fit of a subsphere of the given kind to points on `S^m`.
pub fn fit_subsphere(points: &[SpherePoint], kind: SphereKind) -> Result<SubsphereFit> {
    let Some(first) = points.first() else {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    };
    let dim = first.len();
    if let Some(p) = points.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: p.len(),
        });
    }
    let m = dim - 1;
    if points.len() <= m {
        return Err(Error::TooFewObservations {
            needed: m,
            have: points.len(),
        });
    }
    if points
        .iter()
        .all(|p| dist_unchecked(p.coords(), first.coords()) < 1e-12)
    {
        return Err(Error::Degenerate("all points are identical".into()));
    }

    let problem = Problem { points, kind };
    let mut best: Option<(DVector<f64>, f64, bool, usize)> = None;
    for start in initial_axes(points, kind) {
        let cand = problem.refine(start);
        if best.as_ref().is_none_or(|b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let (v, _, converged, iterations) = best.expect("at least one start");
    if !converged {
        log::warn!("subsphere fit did not converge in {MAX_ITERATIONS} iterations");
    }

    let mut axis = SpherePoint::from_dvector(v)?;
    let mut dists = problem.distances(axis.coords());
    let mut angle = problem.radius(&dists);
    if angle > FRAC_PI_2 {
        axis = axis.negated();
        dists = problem.distances(axis.coords());
        angle = problem.radius(&dists);
    }
    let subsphere = match kind {
        SphereKind::Great => Subsphere::great(axis),
        SphereKind::Small => Subsphere::new(axis, angle.clamp(MIN_ANGLE, FRAC_PI_2))?,
    };
    let residuals: Vec<f64> = dists.iter().map(|d| d - subsphere.angle()).collect();
    let rss = residuals.iter().map(|e| e * e).sum();
    Ok(SubsphereFit {
        subsphere,
        residuals,
        rss,
        converged,
        iterations,
    })
}
