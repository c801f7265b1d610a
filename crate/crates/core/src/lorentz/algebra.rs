//! The Lie algebra 𝔰𝔬(n,1) = 𝔞 ⊕ 𝔪 ⊕ 𝔫⁺ ⊕ 𝔫⁻, its inner product, and the
//! distances it induces.

use nalgebra::{DMatrix, DVector};

use super::group::{horo_generator, GroupElement, Sign};
use super::linalg::{expm, logm, max_abs};
use super::LorentzError;
use crate::scalar::{lit, Scalar};

/// Coordinates of an algebra element in the decomposition `𝔞 ⊕ 𝔪 ⊕ 𝔫⁺ ⊕ 𝔫⁻`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraComponents<T: Scalar> {
    /// Coefficient of the boost generator `H = E₀₁ + E₁₀`.
    pub a_part: T,
    /// Skew `(n−1)×(n−1)` block acting on `e₂ … eₙ`.
    pub m_part: DMatrix<T>,
    pub nplus: DVector<T>,
    pub nminus: DVector<T>,
}

/// An element of 𝔰𝔬(n,1) as an `(n+1)×(n+1)` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement<T: Scalar> {
    mat: DMatrix<T>,
}

impl<T: Scalar> AlgebraElement<T> {
    pub fn from_matrix(mat: DMatrix<T>, tol: f64) -> Result<Self, LorentzError> {
        let x = Self { mat };
        let d = crate::scalar::to_f64(x.defect());
        if d > tol {
            return Err(LorentzError::NotInAlgebra { defect: d });
        }
        Ok(x)
    }

    pub fn from_matrix_unchecked(mat: DMatrix<T>) -> Self {
        Self { mat }
    }

    pub fn mat(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn n(&self) -> usize {
        self.mat.nrows() - 1
    }

    /// `max |XᵀJ + JX|`.
    pub fn defect(&self) -> T {
        let j = super::group::j_matrix::<T>(self.n());
        max_abs(&(self.mat.transpose() * &j + &j * &self.mat))
    }

    /// The boost generator `H` spanning 𝔞.
    pub fn h(n: usize) -> Self {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(0, 1)] = T::one();
        m[(1, 0)] = T::one();
        Self { mat: m }
    }

    /// `Θ`: infinitesimal rotation of the first two frame vectors, so that
    /// `exp(θΘ) = R(θ)`.
    pub fn theta(n: usize) -> Self {
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m[(1, 2)] = T::one();
        m[(2, 1)] = -T::one();
        Self { mat: m }
    }

    pub fn from_components(c: &AlgebraComponents<T>) -> Self {
        let n = c.nplus.len() + 1;
        let mut m = DMatrix::<T>::zeros(n + 1, n + 1);
        m[(0, 1)] = c.a_part;
        m[(1, 0)] = c.a_part;
        m.view_mut((2, 2), (n - 1, n - 1)).copy_from(&c.m_part);
        for k in 0..n - 1 {
            m += horo_generator::<T>(n, k + 2, Sign::Plus) * c.nplus[k];
            m += horo_generator::<T>(n, k + 2, Sign::Minus) * c.nminus[k];
        }
        Self { mat: m }
    }

    pub fn components(&self) -> AlgebraComponents<T> {
        let n = self.n();
        let half = lit::<T>(0.5);
        let mut nplus = DVector::zeros(n - 1);
        let mut nminus = DVector::zeros(n - 1);
        for k in 0..n - 1 {
            let i = k + 2;
            let p = self.mat[(0, i)];
            let q = self.mat[(1, i)];
            nplus[k] = (p - q) * half;
            nminus[k] = (p + q) * half;
        }
        AlgebraComponents {
            a_part: self.mat[(0, 1)],
            m_part: self.mat.view((2, 2), (n - 1, n - 1)).into_owned(),
            nplus,
            nminus,
        }
    }

    /// Cartan involution `θ(X) = −Xᵀ`.
    pub fn cartan(&self) -> Self {
        Self {
            mat: -self.mat.transpose(),
        }
    }

    pub fn exp(&self) -> GroupElement<T> {
        GroupElement::from_matrix_unchecked(expm(&self.mat))
    }

    /// `‖X‖ = sqrt(tr(XXᵀ)/2)`, the norm of [`inner_product`] (valid for all n).
    pub fn norm(&self) -> T {
        (self.mat.norm_squared() * lit::<T>(0.5)).sqrt()
    }

    /// Principal logarithm of a group element.
    pub fn log(g: &GroupElement<T>) -> Result<Self, LorentzError> {
        logm(g.mat())
            .map(|m| Self { mat: m })
            .ok_or(LorentzError::LogDivergence)
    }
}

/// `tr(XY)`.
fn trace_product<T: Scalar>(x: &DMatrix<T>, y: &DMatrix<T>) -> T {
    let mut s = T::zero();
    for i in 0..x.nrows() {
        for k in 0..x.ncols() {
            s += x[(i, k)] * y[(k, i)];
        }
    }
    s
}

/// The invariant form normalised so that `B(Θ, Θ) = −2(n−2)`: `(n−2)·tr(XY)`.
pub fn invariant_form<T: Scalar>(x: &AlgebraElement<T>, y: &AlgebraElement<T>) -> T {
    lit::<T>(x.n() as f64 - 2.0) * trace_product(x.mat(), y.mat())
}

/// The Killing form `tr(ad X ad Y)` of 𝔰𝔬(n,1), equal to `(n−1)·tr(XY)`.
pub fn killing_form<T: Scalar>(x: &AlgebraElement<T>, y: &AlgebraElement<T>) -> T {
    lit::<T>(x.n() as f64 - 1.0) * trace_product(x.mat(), y.mat())
}

/// `⟨X, Y⟩ = −B(X, θY)/(2n−4)` with `B` = [`invariant_form`]. This equals
/// `tr(XYᵀ)/2`. For `n = 2` the normaliser vanishes; with `allow_n2` the same
/// `tr(XYᵀ)/2` is returned, otherwise `DimensionTooSmall`.
pub fn inner_product<T: Scalar>(
    x: &AlgebraElement<T>,
    y: &AlgebraElement<T>,
    allow_n2: bool,
) -> Result<T, LorentzError> {
    let n = x.n();
    if n == 2 {
        if !allow_n2 {
            return Err(LorentzError::DimensionTooSmall { n });
        }
        return Ok(trace_product(x.mat(), &y.mat().transpose()) * lit::<T>(0.5));
    }
    let b = invariant_form(x, &y.cartan());
    Ok(-b / lit::<T>(2.0 * n as f64 - 4.0))
}

/// Left-invariant distance `‖log(g⁻¹h)‖`.
pub fn group_distance<T: Scalar>(g: &GroupElement<T>, h: &GroupElement<T>) -> Result<T, LorentzError> {
    let rel = &g.inverse() * h;
    AlgebraElement::log(&rel).map(|x| x.norm())
}

/// Distance in SO(m) for the metric `tr(XYᵀ)/2`, computed from rotation angles
/// of `aᵀb`; defined everywhere (angles up to π).
pub fn so_distance<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> T {
    super::linalg::so_norm_from_identity(&(a.transpose() * b))
}

/// Great-circle distance on the unit sphere, in `[0, π]`.
pub fn sphere_distance<T: Scalar>(v: &DVector<T>, w: &DVector<T>) -> T {
    let a = (v - w).norm();
    let b = (v + w).norm();
    lit::<T>(2.0) * a.atan2(b)
}

/// Conjugation of a horospherical element by `a_t m`.
///
/// For `Sign::Plus` returns `X₁` with `exp(X₁) = (a_t m) exp(X) (a_t m)⁻¹`,
/// i.e. `X₁ = e^{−t}·m x`. For `Sign::Minus` returns `X₁` with
/// `exp(X) a_t m = a_t m exp(X₁)`, i.e. `X₁ = e^{−t}·m⁻¹ x`.
pub fn conjugate_horospherical<T: Scalar>(t: T, m: &DMatrix<T>, x: &DVector<T>, sign: Sign) -> DVector<T> {
    let s = (-t).exp();
    match sign {
        Sign::Plus => m * x * s,
        Sign::Minus => m.transpose() * x * s,
    }
}
