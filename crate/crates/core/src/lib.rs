//! Regression with compositional responses through principal nested spheres.
//!
//! Compositions are embedded in the positive orthant of the unit sphere with a
//! power transform, decomposed into Principal Nested Spheres (PNS) scores, and
//! regressed on Euclidean predictors in the resulting cylinder space: a
//! wrapped circular-linear fit for the leading score and ordinary least
//! squares for the rest. Fitted scores are mapped back to the simplex through
//! the inverse PNS map.
//!
//! - [`geom`]: sphere primitives (distances, rotations, subsphere projection).
//! - [`simplex`]: the power transform and its inverse.
//! - [`pns`]: backward PNS fitting, scores and their inverse.
//! - [`regress`]: regression in score space and prediction to the simplex.
//! - [`baselines`]: per-component and PCA comparison methods.
//! - [`eval`]: the simulation generator and the cross-validation benchmark.
//! - [`io`]: CSV ingestion and the JSON model file.
//! - [`plot`]: ternary diagram and biplot emitters.

pub mod baselines;
pub mod error;
pub mod eval;
pub mod geom;
pub mod io;
mod linalg;
pub mod plot;
pub mod pns;
pub mod regress;
pub mod simplex;

pub use error::{Error, Result};
pub use geom::{SphereKind, SpherePoint, Subsphere};
pub use pns::{PnsModel, ScoreVector, Selection};
pub use simplex::{Alpha, Composition};
