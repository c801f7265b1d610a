//! Geodesics, distances and orthogeodesics in the hyperboloid model, the unit
//! normal bundle of a closed geodesic, Fermat points, and the length defect of
//! broken geodesics.

mod broken;
mod fermat;
mod line;
mod normal;

pub use broken::{broken_reduce, closed_broken_length, BrokenConfig, BrokenReduction, ClosedBrokenReport};
pub use fermat::{fermat_point, FermatKind, FermatPoint};
pub use line::{
    exp_at, hdistance, log_at, orthogeodesic, perpendicular_foot, tangent_angle, transport, translation_to,
    unit_toward, Geodesic, OrthoConnection, PerpendicularFoot,
};
pub use normal::{fiber_distance_along, parallel_transport, Arc, ModelClosedGeodesic, NormalFiberPoint, D1_ARC};

use crate::lorentz::LorentzError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("geodesics coincide")]
    Identical,
    #[error("geodesics share an ideal endpoint")]
    Asymptotic,
    #[error("geodesics intersect (distance {distance:e})")]
    Intersecting { distance: f64 },
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("turning angle {theta} too close to ±π")]
    AngleTooSharp { theta: f64 },
    #[error("segment length {length} below threshold {min}")]
    ShortSegment { length: f64, min: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
    #[error("axis extraction failed: {0}")]
    Axis(String),
}
