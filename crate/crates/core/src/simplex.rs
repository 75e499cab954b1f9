//! Maps between the simplex and the positive orthant of the sphere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::SpherePoint;

/// Tolerance on the unit-sum constraint of a [`Composition`].
pub const UNIT_SUM_TOL: f64 = 1e-9;

/// Non-negative proportions summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Composition(Vec<f64>);

impl Composition {
    pub fn new(parts: Vec<f64>) -> Result<Self> {
        if parts.len() < 2 {
            return Err(Error::InvalidInput(
                "a composition needs at least 2 parts".into(),
            ));
        }
        if let Some(p) = parts.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "composition part {p} is negative or not finite"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > UNIT_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "composition parts sum to {sum}, expected 1"
            )));
        }
        Ok(Self(parts))
    }

    pub fn parts(&self) -> &[f64] {
        &self.0
    }

    pub fn into_parts(self) -> Vec<f64> {
        self.0
    }

    /// Number of parts, `d + 1`.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Simplex dimension `d`.
    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }
}

impl TryFrom<Vec<f64>> for Composition {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Composition> for Vec<f64> {
    fn from(c: Composition) -> Self {
        c.0
    }
}

/// Exponent of the power transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Alpha(f64);

impl Alpha {
    /// The square-root embedding.
    pub const SQRT: Alpha = Alpha(0.5);

    pub fn new(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "power exponent must be positive, got {value}"
            )));
        }
        Ok(Self(value))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl Default for Alpha {
    fn default() -> Self {
        Self::SQRT
    }
}

impl TryFrom<f64> for Alpha {
    type Error = Error;

    fn try_from(v: f64) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Alpha> for f64 {
    fn from(a: Alpha) -> Self {
        a.0
    }
}

/// Divides a non-negative vector by its total.
pub fn normalize(raw: &[f64]) -> Result<Composition> {
    if let Some(v) = raw.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "cannot normalize: entry {v} is negative or not finite"
        )));
    }
    let total: f64 = raw.iter().sum();
    if total <= 0.0 {
        return Err(Error::InvalidInput(
            "cannot normalize an all-zero vector".into(),
        ));
    }
    Composition::new(raw.iter().map(|v| v / total).collect())
}

/// `q_j = x_j^α / ‖x^α‖`.
pub fn power_transform(x: &Composition, alpha: Alpha) -> SpherePoint {
    let powered: Vec<f64> = x.parts().iter().map(|p| p.powf(alpha.value())).collect();
    SpherePoint::normalize(powered).expect("a composition has a positive part")
}

/// `x_j = q_j^{1/α} / Σ_k q_k^{1/α}`; `q` must already lie in the orthant.
pub fn inverse_power_transform(q: &SpherePoint, alpha: Alpha) -> Result<Composition> {
    if let Some(c) = q.coords().iter().find(|c| **c < 0.0) {
        return Err(Error::InvalidInput(format!(
            "sphere point has negative coordinate {c}; truncate to the orthant first"
        )));
    }
    let inv = 1.0 / alpha.value();
    let powered: Vec<f64> = q.coords().iter().map(|c| c.powf(inv)).collect();
    normalize(&powered)
}

/// Sets negative coordinates to zero and rescales to unit norm.
pub fn orthant_truncate(q: &SpherePoint) -> Result<SpherePoint> {
    if q.coords().iter().all(|c| *c >= 0.0) {
        return Ok(q.clone());
    }
    let clamped: Vec<f64> = q.coords().iter().map(|c| c.max(0.0)).collect();
    if clamped.iter().all(|c| *c == 0.0) {
        return Err(Error::Degenerate(
            "no positive coordinate left after truncation to the orthant".into(),
        ));
    }
    SpherePoint::normalize(clamped)
}

/// Clamps negative parts to zero and renormalizes to unit sum.
pub(crate) fn clamp_to_simplex(values: &[f64]) -> Result<Composition> {
    let clamped: Vec<f64> = values
        .iter()
        .map(|v| if v.is_finite() { v.max(0.0) } else { f64::NAN })
        .collect();
    if clamped.iter().any(|v| v.is_nan()) {
        return Err(Error::Degenerate("non-finite fitted composition".into()));
    }
    normalize(&clamped).map_err(|_| {
        Error::Degenerate("fitted composition has no positive part".into())
    })
}
