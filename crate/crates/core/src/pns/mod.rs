//! Backward Principal Nested Spheres.
//!
//! Starting from data on `S^d`, a subsphere is fitted, its signed residuals
//! become a score, and the data are projected onto it and dropped to
//! `S^{d-1}`. This repeats down to `S^1`, where the last score is the wrapped
//! deviation from the circular mean. Scores are stored in reverse fitting
//! order: `s_1` is the circular score and `s_d` comes from the first level.
//!
//! Every score is an arc length on the original sphere: level `k` residuals
//! are multiplied by `c_k = Π_{j<k} sin r_j`, and the circle score by
//! `ρ = Π_{j<d} sin r_j`, so `s_1 ∈ [-ρπ, ρπ)`.

mod subsphere;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use subsphere::{
    bic_values, fit_subsphere, select_sphere_kind, BicPair, Selection, SubsphereFit,
};

use crate::error::{Error, Result};
use crate::geom::{
    circular_frechet_mean, lift_rotated, project_and_drop, rotation_to_pole, wrap_angle,
    SphereKind, SpherePoint, Subsphere,
};
use crate::linalg::sample_variance;
use crate::simplex::{power_transform, Alpha, Composition};

/// Scores of one observation, `(s_1, ..., s_d)`.
pub type ScoreVector = Vec<f64>;

/// A fitted angle below this is treated as a collapse of the data to a point.
const COLLAPSE_ANGLE: f64 = 1e-8;

/// Margin kept from the ends of `(0, π)` when lifting with clamped residuals.
pub const LIFT_MARGIN: f64 = 1e-6;

/// Fitted PNS parameters: the nested subspheres and the circular mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PnsModel {
    dim: usize,
    /// `levels[k]` lives on `S^{dim - k}`.
    levels: Vec<Subsphere>,
    final_mean_angle: f64,
    /// Set when the data collapsed to a single point before reaching `S^1`;
    /// the point lives on the sphere below the last entry of `levels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    collapsed: Option<SpherePoint>,
    score_scales: Vec<f64>,
    #[serde(default)]
    selection: Selection,
    #[serde(default)]
    alpha: Alpha,
}

impl PnsModel {
    /// Builds a model from its nested subspheres (outermost first) and the
    /// mean angle on the final circle.
    pub fn from_parts(levels: Vec<Subsphere>, final_mean_angle: f64, alpha: Alpha) -> Result<Self> {
        let dim = levels.first().map_or(1, |l| l.ambient_dim());
        let model = Self {
            dim,
            score_scales: scales_for(&levels, dim),
            levels,
            final_mean_angle: wrap_angle(final_mean_angle),
            collapsed: None,
            selection: Selection::Bic,
            alpha,
        };
        model.validate()?;
        Ok(model)
    }

    /// Checks the structural invariants, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.dim < 1 {
            return Err(Error::Corrupt("PNS dimension must be at least 1".into()));
        }
        let levels_ok = match &self.collapsed {
            None => self.levels.len() == self.dim - 1,
            Some(_) => self.levels.len() < self.dim - 1,
        };
        if !levels_ok {
            return Err(Error::Corrupt(format!(
                "expected {} nested levels, found {}",
                self.dim - 1,
                self.levels.len()
            )));
        }
        for (k, level) in self.levels.iter().enumerate() {
            if level.ambient_dim() != self.dim - k {
                return Err(Error::Corrupt(format!(
                    "level {} axis lives on S^{}, expected S^{}",
                    k + 1,
                    level.ambient_dim(),
                    self.dim - k
                )));
            }
            if !(level.angle() > 0.0 && level.angle() <= PI / 2.0) {
                return Err(Error::Corrupt(format!("level {} angle out of range", k + 1)));
            }
        }
        if let Some(p) = &self.collapsed {
            if p.ambient_dim() != self.dim - self.levels.len() {
                return Err(Error::Corrupt("collapsed point has the wrong dimension".into()));
            }
        }
        if self.score_scales.len() != self.dim
            || self.score_scales.iter().any(|c| !(*c > 0.0 && *c <= 1.0))
            || self.score_scales.windows(2).any(|w| w[1] > w[0])
        {
            return Err(Error::Corrupt("invalid score scales".into()));
        }
        if !self.final_mean_angle.is_finite() {
            return Err(Error::Corrupt("non-finite circular mean".into()));
        }
        Ok(())
    }

    /// Dimension `d` of the sphere the model was fitted on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn levels(&self) -> &[Subsphere] {
        &self.levels
    }

    pub fn final_mean_angle(&self) -> f64 {
        self.final_mean_angle
    }

    pub fn collapsed(&self) -> Option<&SpherePoint> {
        self.collapsed.as_ref()
    }

    /// Scale of every level by fitting order (`c_1 = 1, ...`), ending with the
    /// circle radius.
    pub fn score_scales(&self) -> &[f64] {
        &self.score_scales
    }

    /// Radius `ρ` of the final nested circle.
    pub fn circle_radius(&self) -> f64 {
        self.score_scales[self.dim - 1]
    }

    pub fn selection(&self) -> Selection {
        self.selection
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    pub fn with_alpha(mut self, alpha: Alpha) -> Self {
        self.alpha = alpha;
        self
    }

    /// Level (0-based fitting order) that produces score `s_j` (1-based), or
    /// `None` for the circular score.
    fn level_of_score(&self, j: usize) -> Option<usize> {
        (j >= 2).then(|| self.dim - j)
    }

    /// Scale applied to score `s_j` (1-based).
    pub fn scale_of_score(&self, j: usize) -> f64 {
        match self.level_of_score(j) {
            None => self.circle_radius(),
            Some(k) => self.score_scales[k],
        }
    }

    /// Scores of a new point under the fitted parameters.
    pub fn scores_of(&self, x: &SpherePoint) -> Result<ScoreVector> {
        if x.ambient_dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim + 1,
                found: x.len(),
            });
        }
        let mut scores = vec![0.0; self.dim];
        let mut p = x.clone();
        for (k, level) in self.levels.iter().enumerate() {
            let (dropped, res) = project_and_drop(&rotation_to_pole(level.axis()), &p, level)?;
            scores[self.dim - 1 - k] = self.score_scales[k] * res;
            p = dropped;
        }
        if self.collapsed.is_none() {
            let theta = p.coords()[1].atan2(p.coords()[0]);
            scores[0] = self.circle_radius() * wrap_angle(theta - self.final_mean_angle);
        }
        // below a collapse every score stays zero
        Ok(scores)
    }

    fn lift(&self, scores: &[f64], use_first_k: usize, clamp: bool) -> Result<(SpherePoint, usize)> {
        if scores.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: scores.len(),
            });
        }
        if !(1..=self.dim).contains(&use_first_k) {
            return Err(Error::OutOfRange(format!(
                "number of scores {use_first_k} outside 1..={}",
                self.dim
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::InvalidInput("non-finite score".into()));
        }
        let score = |j: usize| if j <= use_first_k { scores[j - 1] } else { 0.0 };
        let mut p = match &self.collapsed {
            Some(point) => point.clone(),
            None => {
                let theta = self.final_mean_angle + score(1) / self.circle_radius();
                SpherePoint::normalize(vec![theta.cos(), theta.sin()])?
            }
        };
        let mut clamped = 0;
        for (k, level) in self.levels.iter().enumerate().rev() {
            let j = self.dim - k;
            let mut residual = score(j) / self.score_scales[k];
            if clamp {
                let lo = -level.angle() + LIFT_MARGIN;
                let hi = PI - level.angle() - LIFT_MARGIN;
                if residual < lo || residual > hi {
                    residual = residual.clamp(lo, hi);
                    clamped += 1;
                }
            }
            p = lift_rotated(&rotation_to_pole(level.axis()), &p, level, residual)?;
        }
        Ok((p, clamped))
    }

    /// Maps scores back to `S^d`, using only the first `use_first_k` of them
    /// and treating the rest as zero.
    pub fn scores_to_sphere(&self, scores: &[f64], use_first_k: usize) -> Result<SpherePoint> {
        self.lift(scores, use_first_k, false).map(|(p, _)| p)
    }

    /// Like [`scores_to_sphere`](Self::scores_to_sphere) but clamps level
    /// residuals that would leave `(0, π)`. Returns how many were clamped.
    pub fn scores_to_sphere_clamped(
        &self,
        scores: &[f64],
        use_first_k: usize,
    ) -> Result<(SpherePoint, usize)> {
        self.lift(scores, use_first_k, true)
    }

    /// The point with all scores zero; it lies on every fitted subsphere.
    pub fn mean(&self) -> SpherePoint {
        self.scores_to_sphere(&vec![0.0; self.dim], self.dim)
            .expect("zero scores are always in range")
    }
}

/// Scale of every level plus the circle radius, by fitting order.
fn scales_for(levels: &[Subsphere], dim: usize) -> Vec<f64> {
    let mut scales = Vec::with_capacity(dim);
    let mut c = 1.0;
    for level in levels {
        scales.push(c);
        c *= level.angle().sin();
    }
    scales.resize(dim, c);
    scales
}

/// Diagnostics for one fitted level.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    /// The level lives on `S^sphere_dim`.
    pub sphere_dim: usize,
    pub kind: SphereKind,
    pub angle: f64,
    pub rss_great: Option<f64>,
    pub rss_small: Option<f64>,
    pub bic: Option<BicPair>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct PnsFit {
    pub model: PnsModel,
    pub scores: Vec<ScoreVector>,
    pub levels: Vec<LevelReport>,
}

/// The PNS mean; see [`PnsModel::mean`].
pub fn pns_mean(model: &PnsModel) -> SpherePoint {
    model.mean()
}

pub fn scores_to_sphere(
    scores: &[f64],
    model: &PnsModel,
    use_first_k: usize,
) -> Result<SpherePoint> {
    model.scores_to_sphere(scores, use_first_k)
}

/// Fits PNS to compositions after the power transform.
pub fn fit_pns_compositions(
    data: &[Composition],
    alpha: Alpha,
    selection: Selection,
) -> Result<PnsFit> {
    let points: Vec<SpherePoint> = data.iter().map(|c| power_transform(c, alpha)).collect();
    let mut fit = fit_pns(&points, selection)?;
    fit.model.alpha = alpha;
    Ok(fit)
}

/// Backward PNS fit of points on `S^d`.
pub fn fit_pns(data: &[SpherePoint], selection: Selection) -> Result<PnsFit> {
    let Some(first) = data.first() else {
        return Err(Error::TooFewObservations { needed: 1, have: 0 });
    };
    let d = first.ambient_dim();
    if let Some(p) = data.iter().find(|p| p.ambient_dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d + 1,
            found: p.len(),
        });
    }
    let n = data.len();
    if n <= d {
        return Err(Error::TooFewObservations { needed: d, have: n });
    }

    let mut scores = vec![vec![0.0; d]; n];
    let mut levels = Vec::new();
    let mut reports = Vec::new();
    let mut points = data.to_vec();
    let mut scale = 1.0;
    let mut collapsed = None;

    for m in (2..=d).rev() {
        if let Some(point) = collapse_point(&points) {
            collapsed = Some(point);
            break;
        }
        let (fit, report) = fit_level(&points, m, selection)?;
        if fit.subsphere.angle() < COLLAPSE_ANGLE {
            collapsed = Some(fit.subsphere.axis().clone());
            break;
        }
        let rot = rotation_to_pole(fit.subsphere.axis());
        for (i, res) in fit.residuals.iter().enumerate() {
            scores[i][m - 1] = scale * res;
        }
        points = points
            .iter()
            .map(|x| project_and_drop(&rot, x, &fit.subsphere).map(|(p, _)| p))
            .collect::<Result<_>>()?;
        scale *= fit.subsphere.angle().sin();
        levels.push(fit.subsphere);
        reports.push(report);
    }

    let final_mean_angle = if collapsed.is_none() {
        let angles: Vec<f64> = points
            .iter()
            .map(|p| p.coords()[1].atan2(p.coords()[0]))
            .collect();
        let mean = circular_frechet_mean(&angles)?;
        for (s, theta) in scores.iter_mut().zip(&angles) {
            s[0] = scale * wrap_angle(theta - mean);
        }
        mean
    } else {
        log::warn!(
            "data collapsed to a point after {} levels; remaining scores set to 0",
            levels.len()
        );
        0.0
    };

    let model = PnsModel {
        dim: d,
        score_scales: scales_for(&levels, d),
        levels,
        final_mean_angle,
        collapsed,
        selection,
        alpha: Alpha::default(),
    };
    model.validate()?;
    Ok(PnsFit {
        model,
        scores,
        levels: reports,
    })
}

/// The common point if all points coincide.
fn collapse_point(points: &[SpherePoint]) -> Option<SpherePoint> {
    let first = &points[0];
    points
        .iter()
        .all(|p| crate::geom::dist_unchecked(p.coords(), first.coords()) < 1e-10)
        .then(|| first.clone())
}

fn fit_level(points: &[SpherePoint], m: usize, selection: Selection) -> Result<(SubsphereFit, LevelReport)> {
    let n = points.len();
    let (fit, rss_great, rss_small, bic) = match selection {
        Selection::ForcedGreat => {
            let g = fit_subsphere(points, SphereKind::Great)?;
            let rss = g.rss;
            (g, Some(rss), None, None)
        }
        Selection::ForcedSmall => {
            let s = fit_subsphere(points, SphereKind::Small)?;
            let rss = s.rss;
            (s, None, Some(rss), None)
        }
        Selection::Bic | Selection::VarianceTest => {
            let g = fit_subsphere(points, SphereKind::Great)?;
            let s = fit_subsphere(points, SphereKind::Small)?;
            let (rg, rs) = (g.rss, s.rss);
            let kind = select_sphere_kind(&g.residuals, &s.residuals, m, selection)?;
            let bic = bic_values(rg, rs, n, m);
            let chosen = if kind == SphereKind::Small { s } else { g };
            (chosen, Some(rg), Some(rs), Some(bic))
        }
    };
    let report = LevelReport {
        sphere_dim: m,
        kind: fit.subsphere.kind(),
        angle: fit.subsphere.angle(),
        rss_great,
        rss_small,
        bic,
        converged: fit.converged,
    };
    Ok((fit, report))
}

/// Share of the total score variance carried by each score.
pub fn variance_explained(scores: &[ScoreVector]) -> Result<Vec<f64>> {
    if scores.len() < 2 {
        return Err(Error::TooFewObservations { needed: 2, have: scores.len() });
    }
    let d = scores[0].len();
    if let Some(s) = scores.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: s.len() });
    }
    let vars: Vec<f64> = (0..d)
        .map(|j| sample_variance(&scores.iter().map(|s| s[j]).collect::<Vec<_>>()))
        .collect();
    let total: f64 = vars.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("scores have zero total variance".into()));
    }
    Ok(vars.iter().map(|v| v / total).collect())
}

/// Trajectories of every sphere coordinate as one score sweeps a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BiplotPaths {
    pub score_index: usize,
    pub grid: Vec<f64>,
    /// `paths[j][g]` is coordinate `j` at grid value `g`.
    pub paths: Vec<Vec<f64>>,
}

impl BiplotPaths {
    /// Range `max - min` of each coordinate path.
    pub fn amplitudes(&self) -> Vec<f64> {
        self.paths
            .iter()
            .map(|p| {
                let (lo, hi) = p
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
                hi - lo
            })
            .collect()
    }
}

/// Valid open range for score `s_j` (1-based).
pub fn score_range(model: &PnsModel, j: usize) -> Result<(f64, f64)> {
    if !(1..=model.dim()).contains(&j) {
        return Err(Error::OutOfRange(format!("score index {j} outside 1..={}", model.dim())));
    }
    match model.level_of_score(j) {
        None => {
            let rho = model.circle_radius();
            Ok((-rho * PI, rho * PI))
        }
        Some(k) => {
            let level = model.levels.get(k).ok_or_else(|| {
                Error::OutOfRange(format!("score {j} belongs to a collapsed level"))
            })?;
            let c = model.score_scales[k];
            Ok((-c * level.angle(), c * (PI - level.angle())))
        }
    }
}

/// Sweeps score `score_index` over `grid` with every other score at zero.
pub fn biplot_paths(model: &PnsModel, score_index: usize, grid: &[f64]) -> Result<BiplotPaths> {
    if !(score_index == 1 || score_index == 2) {
        return Err(Error::OutOfRange(format!(
            "biplot paths are defined for scores 1 and 2, got {score_index}"
        )));
    }
    let (lo, hi) = score_range(model, score_index)?;
    // the lower end of a level range sits on the axis, which no lift reaches
    let in_range = |t: f64| if score_index == 1 { t >= lo && t < hi } else { t > lo && t < hi };
    if let Some(t) = grid.iter().find(|t| !in_range(**t)) {
        return Err(Error::OutOfRange(format!(
            "grid value {t} outside [{lo}, {hi}) for score {score_index}"
        )));
    }
    let d = model.dim();
    let mut paths = vec![Vec::with_capacity(grid.len()); d + 1];
    let mut scores = vec![0.0; d];
    for &t in grid {
        scores[score_index - 1] = t;
        let p = model.scores_to_sphere(&scores, d)?;
        for (path, c) in paths.iter_mut().zip(p.coords()) {
            path.push(*c);
        }
    }
    Ok(BiplotPaths {
        score_index,
        grid: grid.to_vec(),
        paths,
    })
}
