use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::lorentz::linalg::{max_abs, minimal_rotation, so_norm_from_identity};
use crate::lorentz::{flow, rewrite, rot2};
use crate::policy::NumericPolicy;
use crate::word::axis_invariants;
use crate::Mat;

/// Thresholds for the broken-geodesic reductions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BrokenConfig {
    /// Segments shorter than this are rejected.
    pub min_length: f64,
    /// Turning angles within this of ±π are rejected.
    pub angle_margin: f64,
}

impl Default for BrokenConfig {
    fn default() -> Self {
        Self {
            min_length: 2.0,
            angle_margin: 1e-3,
        }
    }
}

/// `G(t₁)R(θ)G(t₂) = Y₁ G(t) Y₂` with `Y₁, Y₂ ∈ SO(n)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BrokenReduction {
    #[serde(with = "crate::serde_mat::matrix")]
    pub y1: Mat,
    pub t: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub y2: Mat,
    /// `t₁ + t₂ − t`.
    pub defect: f64,
    pub y1_distance: f64,
    pub y2_distance: f64,
    /// `max|Y₁G(t)Y₂ − g| / max|g|`.
    pub reconstruction_error: f64,
}

pub fn broken_reduce(n: usize, t1: f64, theta: f64, t2: f64, cfg: &BrokenConfig) -> Result<BrokenReduction, GeometryError> {
    if theta.abs() >= std::f64::consts::PI - cfg.angle_margin {
        return Err(GeometryError::AngleTooSharp { theta });
    }
    for len in [t1, t2] {
        if len <= cfg.min_length {
            return Err(GeometryError::ShortSegment {
                length: len,
                min: cfg.min_length,
            });
        }
    }
    let g = &(&flow(n, t1) * &rot2(n, theta)) * &flow(n, t2);
    let q = g.mat().column(0).into_owned();
    let spatial = q.rows(1, n).into_owned();
    let r = spatial.norm();
    let t = r.asinh();
    let w = spatial / r;
    let mut e1 = DVector::zeros(n);
    e1[0] = 1.0;
    let y1 = minimal_rotation(&e1, &w);
    let k1 = rewrite(&y1, 1e-10)?;
    // g⁻¹p₀ = Y₂⁻¹ a_{−t} p₀ fixes Y₂⁻¹e₁; the whole word lives in the
    // (e₀, e₁, e₂) block, so that determines Y₂.
    let ginv = &(&flow(n, -t2) * &rot2(n, -theta)) * &flow(n, -t1);
    let qi = ginv.mat().column(0).rows(1, n).into_owned();
    let u = -&qi / qi.norm();
    let y2 = minimal_rotation(&u, &e1);
    let k2 = rewrite(&y2, 1e-10)?;
    let recon = &(&k1 * &flow(n, t)) * &k2;
    let reconstruction_error = max_abs(&(recon.mat() - g.mat())) / max_abs(g.mat());
    Ok(BrokenReduction {
        y1_distance: so_norm_from_identity(&y1),
        y2_distance: so_norm_from_identity(&y2),
        y1,
        t,
        y2,
        defect: t1 + t2 - t,
        reconstruction_error,
    })
}

/// Length of the closed geodesic homotopic to two segments of lengths
/// `l⁺, l⁻` joined at right angles (both turns in the same sense).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosedBrokenReport {
    pub length: f64,
    /// `l⁺ + l⁻ − 2 ln 2`.
    pub predicted: f64,
    /// `|length − predicted|`.
    pub defect: f64,
    /// `2 acosh(sinh(l⁺/2) sinh(l⁻/2))`, exact for this configuration.
    pub planar_exact: f64,
}

pub fn closed_broken_length(
    n: usize,
    lplus: f64,
    lminus: f64,
    cfg: &BrokenConfig,
    policy: &NumericPolicy,
) -> Result<ClosedBrokenReport, GeometryError> {
    for len in [lplus, lminus] {
        if len <= cfg.min_length {
            return Err(GeometryError::ShortSegment {
                length: len,
                min: cfg.min_length,
            });
        }
    }
    let half = std::f64::consts::FRAC_PI_2;
    let g = &(&(&flow(n, lplus) * &rot2(n, half)) * &flow(n, lminus)) * &rot2(n, half);
    let inv = axis_invariants(&g, policy).map_err(|e| GeometryError::Axis(e.to_string()))?;
    let predicted = lplus + lminus - 2.0 * std::f64::consts::LN_2;
    Ok(ClosedBrokenReport {
        length: inv.t,
        predicted,
        defect: (inv.t - predicted).abs(),
        planar_exact: 2.0 * ((lplus / 2.0).sinh() * (lminus / 2.0).sinh()).acosh(),
    })
}
