//! Numerical workbench for building closed surfaces out of good pants in
//! hyperbolic n-manifolds: the SO(n,1) frame calculus, Steiner graphs of pants
//! groups, the good/bad dichotomy, foot measures on unit normal bundles, and
//! Hall matching of pants along their cuffs.
//!
//! The Lorentz layer ([`lorentz`]) is generic over the scalar type; everything
//! above it works in `f64` through the aliases below.

pub mod geometry;
pub mod foot;
pub mod lorentz;
pub mod matching;
pub mod pants;
pub mod policy;
pub mod scalar;
pub mod serde_mat;
pub mod steiner;
pub mod word;

pub use policy::NumericPolicy;
pub use scalar::Scalar;

/// `f64` group element.
pub type GroupElement = lorentz::GroupElement<f64>;
/// `f32` group element.
pub type GroupElement32 = lorentz::GroupElement<f32>;
pub type AlgebraElement = lorentz::AlgebraElement<f64>;
pub type AlgebraElement32 = lorentz::AlgebraElement<f32>;
pub type HPoint = lorentz::HPoint<f64>;
pub type HPoint32 = lorentz::HPoint<f32>;
pub type FrameAtPoint = lorentz::FrameAtPoint<f64>;
/// Dense `f64` matrix used for SO(m) elements.
pub type Mat = nalgebra::DMatrix<f64>;
/// Dense `f64` vector.
pub type Vector = nalgebra::DVector<f64>;
