//! Sphere geometry shared by the PNS fitting and inverse maps.
//!
//! Points are unit vectors in `R^{m+1}`. A [`Subsphere`] is the set of points at
//! a fixed geodesic distance (`angle`) from an `axis`; dropping a dimension maps
//! a subsphere of `S^m` onto the unit sphere `S^{m-1}` and lifting reverses it
//! with an optional signed radial offset.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of a [`SpherePoint`].
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Tolerance on the distance to the axis accepted by [`drop_dimension`].
pub const ON_SUBSPHERE_TOL: f64 = 1e-6;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut w = theta - TAU * ((theta + PI) / TAU).floor();
    if w >= PI {
        w -= TAU;
    }
    if w < -PI {
        w += TAU;
    }
    w
}

/// A unit vector on `S^m`, stored with its `m + 1` ambient coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpherePoint(Vec<f64>);

impl SpherePoint {
    /// Wraps coordinates that already have unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "a sphere point needs at least 2 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite sphere coordinate".into()));
        }
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "sphere point has norm {norm}, expected 1"
            )));
        }
        Ok(Self(coords))
    }

    /// Scales an arbitrary non-zero vector to unit length.
    pub fn normalize(coords: Vec<f64>) -> Result<Self> {
        let norm = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
        if !(norm > 1e-300) || !norm.is_finite() {
            return Err(Error::Degenerate("cannot normalize a zero vector".into()));
        }
        Self::new(coords.into_iter().map(|c| c / norm).collect())
    }

    pub(crate) fn from_dvector(v: DVector<f64>) -> Result<Self> {
        Self::normalize(v.iter().copied().collect())
    }

    /// The `k`-th standard basis vector of `R^{len}`.
    pub fn basis(len: usize, k: usize) -> Self {
        let mut c = vec![0.0; len];
        c[k] = 1.0;
        Self(c)
    }

    /// The north pole `e_{m+1}` of `S^m`.
    pub fn north_pole(ambient_dim: usize) -> Self {
        Self::basis(ambient_dim + 1, ambient_dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    /// The sphere dimension `m` (one less than the number of coordinates).
    pub fn ambient_dim(&self) -> usize {
        self.0.len() - 1
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn dot(&self, other: &SpherePoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    pub(crate) fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.0)
    }
}

impl TryFrom<Vec<f64>> for SpherePoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpherePoint> for Vec<f64> {
    fn from(p: SpherePoint) -> Self {
        p.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SphereKind {
    Great,
    Small,
}

impl std::fmt::Display for SphereKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SphereKind::Great => f.write_str("great"),
            SphereKind::Small => f.write_str("small"),
        }
    }
}

/// The set `{x : d(x, axis) = angle}` on `S^m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subsphere {
    axis: SpherePoint,
    angle: f64,
}

impl Subsphere {
    /// Builds a subsphere; `angle` must lie in `(0, π/2]`.
    pub fn new(axis: SpherePoint, angle: f64) -> Result<Self> {
        if !(angle > 0.0 && angle <= FRAC_PI_2) {
            return Err(Error::OutOfRange(format!(
                "subsphere angle {angle} outside (0, π/2]"
            )));
        }
        Ok(Self { axis, angle })
    }

    pub fn great(axis: SpherePoint) -> Self {
        Self {
            axis,
            angle: FRAC_PI_2,
        }
    }

    pub fn axis(&self) -> &SpherePoint {
        &self.axis
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn kind(&self) -> SphereKind {
        if self.angle == FRAC_PI_2 {
            SphereKind::Great
        } else {
            SphereKind::Small
        }
    }

    /// Dimension `m` of the sphere this subsphere lives on.
    pub fn ambient_dim(&self) -> usize {
        self.axis.ambient_dim()
    }
}

fn check_same_dim(a: &SpherePoint, b: &SpherePoint) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// Arc length between two points, in `[0, π]`.
pub fn geodesic_dist(a: &SpherePoint, b: &SpherePoint) -> Result<f64> {
    check_same_dim(a, b)?;
    Ok(dist_unchecked(a.coords(), b.coords()))
}

/// `arccos(a·b)` evaluated as `2 atan2(|a-b|, |a+b|)`, which keeps full
/// precision near 0 and π.
pub(crate) fn dist_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt())).clamp(0.0, PI)
}

/// Rotation in the plane of two unit vectors taking `from` onto `to`, identity
/// on the orthogonal complement. Requires `from != -to`.
fn plane_rotation(from: &DVector<f64>, to: &DVector<f64>) -> DMatrix<f64> {
    let n = from.len();
    let c = from.dot(to);
    let w = from - to * c;
    let s = w.norm();
    if s < 1e-300 {
        return DMatrix::identity(n, n);
    }
    let u = w / s;
    let mut r = DMatrix::identity(n, n);
    r += (&u * u.transpose() + to * to.transpose()) * (c - 1.0);
    r += (to * u.transpose() - &u * to.transpose()) * s;
    r
}

/// Orthogonal matrix with determinant +1 sending `v` to the north pole
/// `e_{m+1}`.
pub fn rotation_to_pole(v: &SpherePoint) -> DMatrix<f64> {
    let n = v.len();
    let pole = DVector::from_fn(n, |i, _| if i == n - 1 { 1.0 } else { 0.0 });
    let vv = v.to_dvector();
    if vv.dot(&pole) < -1.0 + 1e-9 {
        // Near the south pole the rotation plane is ill-defined; go through e_1.
        let e1 = DVector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 });
        return plane_rotation(&e1, &pole) * plane_rotation(&vv, &e1);
    }
    plane_rotation(&vv, &pole)
}

/// Closest point of the subsphere to `x` along the great circle through `x`
/// and the axis.
pub fn project_to_subsphere(x: &SpherePoint, s: &Subsphere) -> Result<SpherePoint> {
    check_same_dim(x, s.axis())?;
    let rho = dist_unchecked(x.coords(), s.axis().coords());
    let sin_rho = rho.sin();
    if sin_rho < 1e-12 {
        return Err(Error::Degenerate(
            "point coincides with the subsphere axis or its antipode".into(),
        ));
    }
    let r = s.angle();
    let (a, b) = (r.sin() / sin_rho, (rho - r).sin() / sin_rho);
    SpherePoint::normalize(
        x.coords()
            .iter()
            .zip(s.axis().coords())
            .map(|(xi, vi)| a * xi + b * vi)
            .collect(),
    )
}

/// Maps a point of the subsphere onto `S^{m-1}`.
pub fn drop_dimension(x: &SpherePoint, s: &Subsphere) -> Result<SpherePoint> {
    check_same_dim(x, s.axis())?;
    let dist = dist_unchecked(x.coords(), s.axis().coords());
    if (dist - s.angle()).abs() > ON_SUBSPHERE_TOL {
        return Err(Error::InvalidInput(format!(
            "point is at distance {dist} from the axis, subsphere angle is {}",
            s.angle()
        )));
    }
    drop_rotated(&rotation_to_pole(s.axis()), x)
}

/// Inverse of [`drop_dimension`], placing the point at distance
/// `angle + residual` from the axis.
pub fn lift_dimension(p: &SpherePoint, s: &Subsphere, residual: f64) -> Result<SpherePoint> {
    lift_rotated(&rotation_to_pole(s.axis()), p, s, residual)
}

pub(crate) fn drop_rotated(rot: &DMatrix<f64>, x: &SpherePoint) -> Result<SpherePoint> {
    let y = rot * x.to_dvector();
    let m = y.len() - 1;
    SpherePoint::from_dvector(y.rows(0, m).into_owned())
}

pub(crate) fn lift_rotated(
    rot: &DMatrix<f64>,
    p: &SpherePoint,
    s: &Subsphere,
    residual: f64,
) -> Result<SpherePoint> {
    if p.len() + 1 != s.axis().len() {
        return Err(Error::DimensionMismatch {
            expected: s.axis().len() - 1,
            found: p.len(),
        });
    }
    let t = s.angle() + residual;
    if !(t > 0.0 && t < PI) {
        return Err(Error::OutOfRange(format!(
            "lifted distance {t} outside (0, π)"
        )));
    }
    let m = p.len();
    let mut y = DVector::zeros(m + 1);
    for (i, c) in p.coords().iter().enumerate() {
        y[i] = t.sin() * c;
    }
    y[m] = t.cos();
    SpherePoint::from_dvector(rot.transpose() * y)
}

/// Projects `x` onto the subsphere and drops it to `S^{m-1}` in one step.
/// Returns the dropped point and the signed residual `d(x, axis) - angle`.
pub(crate) fn project_and_drop(
    rot: &DMatrix<f64>,
    x: &SpherePoint,
    s: &Subsphere,
) -> Result<(SpherePoint, f64)> {
    let dist = dist_unchecked(x.coords(), s.axis().coords());
    let dropped = drop_rotated(rot, x).map_err(|_| {
        Error::Degenerate("point coincides with the subsphere axis or its antipode".into())
    })?;
    Ok((dropped, dist - s.angle()))
}

fn wrapped_sse(angles: &[f64], mu: f64) -> f64 {
    angles.iter().map(|a| wrap_angle(a - mu).powi(2)).sum()
}

/// Intrinsic (Fréchet) mean on the circle, in `[-π, π)`.
///
/// Every local minimiser of `Σ wrap(θ_i - μ)²` has the form `θ̄ + 2πk/n`, so
/// all `n` candidates are evaluated together with the extrinsic mean.
pub fn circular_frechet_mean(angles: &[f64]) -> Result<f64> {
    if angles.is_empty() {
        return Err(Error::InvalidInput(
            "circular mean of an empty sample".into(),
        ));
    }
    let n = angles.len();
    let wrapped: Vec<f64> = angles.iter().map(|&a| wrap_angle(a)).collect();
    let linear_mean = wrapped.iter().sum::<f64>() / n as f64;
    let (s, c) = wrapped
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));

    let mut candidates: Vec<f64> = (0..n)
        .map(|k| wrap_angle(linear_mean + TAU * k as f64 / n as f64))
        .collect();
    if s != 0.0 || c != 0.0 {
        candidates.push(wrap_angle(s.atan2(c)));
    }

    let mut best = (f64::INFINITY, f64::INFINITY);
    for mu in candidates {
        let obj = wrapped_sse(&wrapped, mu);
        let tol = 1e-12 * (1.0 + best.0.abs());
        if obj < best.0 - tol || ((obj - best.0).abs() <= tol && mu < best.1) {
            best = (obj, mu);
        }
    }
    Ok(best.1)
}
