//! Numeric policy: every tolerance the library uses lives here.

use serde::{Deserialize, Serialize};

/// Tolerances and iteration caps, grouped in one place so callers can tune
/// them per scalar type or per experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NumericPolicy {
    /// Structural invariants such as `gᵀJg = J` and unit norms.
    pub structural: f64,
    /// Round trips (decompose then recompose).
    pub roundtrip: f64,
    /// Radius of the identity neighbourhood where NAN factorisation is attempted.
    pub nan_radius: f64,
    /// Newton stopping tolerance for NAN factorisation.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Residual perturbation size at which absorption stops.
    pub absorb_tol: f64,
    pub absorb_max_iter: usize,
    /// Spectral radius margin that separates loxodromic from everything else.
    pub loxodromic_margin: f64,
    /// Drift of `gᵀJg - J` above which products are re-orthonormalised.
    pub reorthonormalize_at: f64,
}

impl NumericPolicy {
    /// Defaults tuned for `f64`.
    pub const F64: NumericPolicy = NumericPolicy {
        structural: 1e-9,
        roundtrip: 1e-10,
        nan_radius: 0.1,
        newton_tol: 1e-14,
        newton_max_iter: 50,
        absorb_tol: 1e-13,
        absorb_max_iter: 60,
        loxodromic_margin: 1e-4,
        reorthonormalize_at: 1e-9,
    };

    /// Loosened defaults for `f32`.
    pub const F32: NumericPolicy = NumericPolicy {
        structural: 1e-4,
        roundtrip: 1e-4,
        nan_radius: 0.1,
        newton_tol: 1e-6,
        newton_max_iter: 50,
        absorb_tol: 1e-6,
        absorb_max_iter: 60,
        loxodromic_margin: 1e-3,
        reorthonormalize_at: 1e-4,
    };
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self::F64
    }
}
