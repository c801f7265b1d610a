//! SO⁺(n,1) acting on the hyperboloid model of H^n.
//!
//! Conventions: `J = diag(−1, 1, …, 1)`, base point `p₀ = e₀`, base frame
//! `u_i = e_i`. A group element `g` is identified with the frame `g·Ψ₀`, and
//! an instruction `h` acts on frames from the right: `Ψ·h = gΨ₀·h`.
//! `K = diag(1, SO(n))`, `M = diag(1, 1, SO(n−1))` fixes `p₀` and `u₁`,
//! `a_t` is the boost in the `e₀, e₁` plane and `N⁺` is contracted by
//! `a_t (·) a_{−t}` as `t → +∞`.

pub mod algebra;
pub mod group;
pub mod linalg;
pub mod nan;
pub mod so;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LorentzError {
    #[error("matrix is not in SO+(n,1) (defect {defect:e})")]
    NotLorentz { defect: f64 },
    #[error("matrix is not a rotation (defect {defect:e})")]
    NotOrthogonal { defect: f64 },
    #[error("vector is not on the hyperboloid (defect {defect:e})")]
    NotOnHyperboloid { defect: f64 },
    #[error("matrix is not in so(n,1) (defect {defect:e})")]
    NotInAlgebra { defect: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("inner product needs n >= 3 (got n = {n})")]
    DimensionTooSmall { n: usize },
    #[error("element at distance {distance} from identity, threshold {threshold}")]
    NotNearIdentity { distance: f64, threshold: f64 },
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("no principal logarithm")]
    LogDivergence,
}

pub use algebra::{
    conjugate_horospherical, group_distance, inner_product, invariant_form, killing_form, so_distance,
    sphere_distance, AlgebraComponents, AlgebraElement,
};
pub use group::{
    b_element, boost, check_rotation, exp_n, flow, j_matrix, m_element, minkowski, rewrite, rot2, FrameAtPoint,
    GroupElement, HPoint, Sign,
};
pub use nan::{nan_by_elimination, nan_decompose, nan_decompose_from, NanChart, NanFactors};
