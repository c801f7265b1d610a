//! Elements of SO⁺(n,1), points of the hyperboloid, and oriented frames.

use std::ops::Mul;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::linalg::{expm, max_abs, orthogonality_defect};
use super::LorentzError;
use crate::scalar::{lit, to_f64, Scalar};

/// The Minkowski form `⟨x, y⟩_J = −x₀y₀ + Σ xᵢyᵢ`.
pub fn minkowski<T: Scalar>(x: &DVector<T>, y: &DVector<T>) -> T {
    let mut s = -(x[0] * y[0]);
    for i in 1..x.len() {
        s += x[i] * y[i];
    }
    s
}

/// `J = diag(−1, 1, …, 1)` of size `n + 1`.
pub fn j_matrix<T: Scalar>(n: usize) -> DMatrix<T> {
    let mut j = DMatrix::<T>::identity(n + 1, n + 1);
    j[(0, 0)] = -T::one();
    j
}

/// Which horospherical subgroup.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// An element of the identity component of SO(n,1), stored as an
/// `(n+1)×(n+1)` matrix acting on the hyperboloid model.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement<T: Scalar> {
    mat: DMatrix<T>,
}

impl<T: Scalar> GroupElement<T> {
    /// Wraps a matrix after checking `gᵀJg = J`, `det = 1` and `g₀₀ ≥ 1`.
    pub fn from_matrix(mat: DMatrix<T>, tol: f64) -> Result<Self, LorentzError> {
        if mat.nrows() != mat.ncols() || mat.nrows() < 3 {
            return Err(LorentzError::DimensionMismatch {
                expected: 3,
                found: mat.nrows(),
            });
        }
        let g = Self { mat };
        let defect = to_f64(g.lorentz_defect());
        if defect > tol {
            return Err(LorentzError::NotLorentz { defect });
        }
        let det = to_f64(g.mat.determinant());
        if (det - 1.0).abs() > tol.max(1e-12) * 10.0 || to_f64(g.mat[(0, 0)]) < 1.0 - tol {
            return Err(LorentzError::NotLorentz {
                defect: (det - 1.0).abs(),
            });
        }
        Ok(g)
    }

    /// Wraps a matrix that is known by construction to lie in the group.
    pub fn from_matrix_unchecked(mat: DMatrix<T>) -> Self {
        Self { mat }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            mat: DMatrix::identity(n + 1, n + 1),
        }
    }

    /// Ambient dimension n of H^n.
    pub fn n(&self) -> usize {
        self.mat.nrows() - 1
    }

    pub fn mat(&self) -> &DMatrix<T> {
        &self.mat
    }

    pub fn into_matrix(self) -> DMatrix<T> {
        self.mat
    }

    /// Exact inverse `J gᵀ J`.
    pub fn inverse(&self) -> Self {
        let mut m = self.mat.transpose();
        let k = m.nrows();
        for i in 1..k {
            m[(0, i)] = -m[(0, i)];
            m[(i, 0)] = -m[(i, 0)];
        }
        Self { mat: m }
    }

    /// `max |gᵀJg − J|`.
    pub fn lorentz_defect(&self) -> T {
        let n = self.n();
        let j = j_matrix::<T>(n);
        max_abs(&(self.mat.transpose() * &j * &self.mat - j))
    }

    /// Restores `gᵀJg = J` by J-orthonormalising the columns (Gram–Schmidt
    /// starting from the timelike column).
    pub fn reorthonormalize(&self) -> Self {
        let k = self.mat.nrows();
        let mut cols: Vec<DVector<T>> = (0..k).map(|j| self.mat.column(j).into_owned()).collect();
        for j in 0..k {
            for _ in 0..2 {
                for i in 0..j {
                    let sign = if i == 0 { -T::one() } else { T::one() };
                    let proj = minkowski(&cols[i], &cols[j]) * sign;
                    let ci = cols[i].clone();
                    cols[j] -= ci * proj;
                }
            }
            let q = minkowski(&cols[j], &cols[j]);
            let nrm = q.abs().sqrt();
            cols[j] /= nrm;
        }
        Self {
            mat: DMatrix::from_columns(&cols),
        }
    }

    /// Product followed by re-orthonormalisation when the drift exceeds `at`.
    pub fn mul_checked(&self, other: &Self, at: f64) -> Self {
        let p = Self {
            mat: &self.mat * &other.mat,
        };
        if to_f64(p.lorentz_defect()) > at {
            p.reorthonormalize()
        } else {
            p
        }
    }

    /// Image of a point of the hyperboloid.
    pub fn act(&self, p: &HPoint<T>) -> HPoint<T> {
        HPoint {
            coords: &self.mat * &p.coords,
        }
    }

    /// Image of the base point `p₀`.
    pub fn base_point(&self) -> HPoint<T> {
        HPoint {
            coords: self.mat.column(0).into_owned(),
        }
    }

    /// The i-th frame vector (1-based as in the paper: `u_1 … u_n`).
    pub fn frame_vector(&self, i: usize) -> DVector<T> {
        self.mat.column(i).into_owned()
    }

    /// Converts to an `f64` element.
    pub fn to_f64(&self) -> GroupElement<f64> {
        GroupElement {
            mat: self.mat.map(|v| to_f64(v)),
        }
    }

    /// Row-major entries as `f64`.
    pub fn rows_f64(&self) -> Vec<Vec<f64>> {
        (0..self.mat.nrows())
            .map(|i| (0..self.mat.ncols()).map(|j| to_f64(self.mat[(i, j)])).collect())
            .collect()
    }
}

impl GroupElement<f64> {
    /// Converts an `f64` element to another scalar type.
    pub fn cast<U: Scalar>(&self) -> GroupElement<U> {
        GroupElement {
            mat: self.mat.map(|v| lit::<U>(v)),
        }
    }
}

impl<T: Scalar> Mul for &GroupElement<T> {
    type Output = GroupElement<T>;
    fn mul(self, rhs: Self) -> GroupElement<T> {
        GroupElement {
            mat: &self.mat * &rhs.mat,
        }
    }
}

impl<T: Scalar> Mul for GroupElement<T> {
    type Output = GroupElement<T>;
    fn mul(self, rhs: Self) -> GroupElement<T> {
        GroupElement {
            mat: self.mat * rhs.mat,
        }
    }
}

impl<T: Scalar> Serialize for GroupElement<T> {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows_f64().serialize(s)
    }
}

impl<'de> Deserialize<'de> for GroupElement<f64> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(serde::de::Error::custom("group element must be square"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        let mat = DMatrix::from_row_slice(k, k, &flat);
        GroupElement::from_matrix(mat, 1e-6).map_err(serde::de::Error::custom)
    }
}

/// A point of the upper sheet of the hyperboloid `⟨x, x⟩_J = −1`.
#[derive(Clone, Debug, PartialEq)]
pub struct HPoint<T: Scalar> {
    pub coords: DVector<T>,
}

impl<T: Scalar> HPoint<T> {
    pub fn new(coords: DVector<T>, tol: f64) -> Result<Self, LorentzError> {
        let q = to_f64(minkowski(&coords, &coords));
        if (q + 1.0).abs() > tol * to_f64(coords[0]).abs().max(1.0).powi(2) || coords[0] <= T::zero() {
            return Err(LorentzError::NotOnHyperboloid { defect: (q + 1.0).abs() });
        }
        Ok(Self { coords })
    }

    /// The base point `p₀ = (1, 0, …, 0)`.
    pub fn origin(n: usize) -> Self {
        let mut c = DVector::zeros(n + 1);
        c[0] = T::one();
        Self { coords: c }
    }

    pub fn n(&self) -> usize {
        self.coords.len() - 1
    }

    /// Projects back onto the sheet by rescaling.
    pub fn normalized(&self) -> Self {
        let q = -minkowski(&self.coords, &self.coords);
        Self {
            coords: &self.coords / q.sqrt(),
        }
    }
}

/// An oriented orthonormal frame of `T_p H^n`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameAtPoint<T: Scalar> {
    pub base: HPoint<T>,
    pub vectors: Vec<DVector<T>>,
}

impl<T: Scalar> FrameAtPoint<T> {
    /// The frame `Ψ = g·Ψ₀`.
    pub fn of(g: &GroupElement<T>) -> Self {
        let n = g.n();
        Self {
            base: g.base_point(),
            vectors: (1..=n).map(|i| g.frame_vector(i)).collect(),
        }
    }

    /// The group element `g` with `g·Ψ₀ = Ψ`.
    pub fn group(&self) -> GroupElement<T> {
        let mut cols = vec![self.base.coords.clone()];
        cols.extend(self.vectors.iter().cloned());
        GroupElement::from_matrix_unchecked(DMatrix::from_columns(&cols))
    }

    /// Checks tangency, orthonormality and orientation.
    pub fn validate(&self, tol: f64) -> Result<(), LorentzError> {
        GroupElement::from_matrix(self.group().into_matrix(), tol).map(|_| ())
    }

    /// Right action `Ψ·h`: the instruction h applied to the frame.
    pub fn right_act(&self, h: &GroupElement<T>) -> Self {
        Self::of(&(&self.group() * h))
    }

    /// Left action `g·Ψ`: the isometry g moving the frame.
    pub fn left_act(&self, g: &GroupElement<T>) -> Self {
        Self {
            base: g.act(&self.base),
            vectors: self.vectors.iter().map(|v| g.mat() * v).collect(),
        }
    }
}

/// The boost `a_t` in the plane of `e₀, e₁`: frame flow along the first vector.
pub fn flow<T: Scalar>(n: usize, t: T) -> GroupElement<T> {
    let mut m = DMatrix::<T>::identity(n + 1, n + 1);
    let (c, s) = (t.cosh(), t.sinh());
    m[(0, 0)] = c;
    m[(1, 1)] = c;
    m[(0, 1)] = s;
    m[(1, 0)] = s;
    GroupElement::from_matrix_unchecked(m)
}

/// `R(θ)`: rotation of the first two frame vectors, with the matrix
/// `[[cos θ, sin θ], [−sin θ, cos θ]]` in the `e₁, e₂` block.
pub fn rot2<T: Scalar>(n: usize, theta: T) -> GroupElement<T> {
    let mut m = DMatrix::<T>::identity(n + 1, n + 1);
    let (c, s) = (theta.cos(), theta.sin());
    m[(1, 1)] = c;
    m[(1, 2)] = s;
    m[(2, 1)] = -s;
    m[(2, 2)] = c;
    GroupElement::from_matrix_unchecked(m)
}

/// Frame rewrite by `k ∈ SO(n)`: the element `diag(1, k)` of K.
pub fn rewrite<T: Scalar>(k: &DMatrix<T>, tol: f64) -> Result<GroupElement<T>, LorentzError> {
    check_rotation(k, tol)?;
    let n = k.nrows();
    let mut m = DMatrix::<T>::identity(n + 1, n + 1);
    m.view_mut((1, 1), (n, n)).copy_from(k);
    Ok(GroupElement::from_matrix_unchecked(m))
}

/// The element `diag(1, 1, y)` of M for `y ∈ SO(n−1)`.
pub fn m_element<T: Scalar>(y: &DMatrix<T>, tol: f64) -> Result<GroupElement<T>, LorentzError> {
    check_rotation(y, tol)?;
    Ok(m_element_unchecked(y))
}

pub(crate) fn m_element_unchecked<T: Scalar>(y: &DMatrix<T>) -> GroupElement<T> {
    let k = y.nrows();
    let mut m = DMatrix::<T>::identity(k + 2, k + 2);
    m.view_mut((2, 2), (k, k)).copy_from(y);
    GroupElement::from_matrix_unchecked(m)
}

/// Element of B = AM with the given flow time and rotation part.
pub fn b_element<T: Scalar>(t: T, y: &DMatrix<T>) -> GroupElement<T> {
    let n = y.nrows() + 1;
    &flow(n, t) * &m_element_unchecked(y)
}

/// Checks that `k` is orthogonal with determinant one.
pub fn check_rotation<T: Scalar>(k: &DMatrix<T>, tol: f64) -> Result<(), LorentzError> {
    if k.nrows() != k.ncols() {
        return Err(LorentzError::DimensionMismatch {
            expected: k.nrows(),
            found: k.ncols(),
        });
    }
    let defect = to_f64(orthogonality_defect(k));
    let det = if k.nrows() == 0 { 1.0 } else { to_f64(k.determinant()) };
    if defect > tol || (det - 1.0).abs() > tol.max(1e-12) * 10.0 {
        return Err(LorentzError::NotOrthogonal {
            defect: defect.max((det - 1.0).abs()),
        });
    }
    Ok(())
}

/// Generator of `𝔫^±` for frame index `i ∈ 2..=n`.
pub fn horo_generator<T: Scalar>(n: usize, i: usize, sign: Sign) -> DMatrix<T> {
    let mut x = DMatrix::<T>::zeros(n + 1, n + 1);
    let s = match sign {
        Sign::Plus => -T::one(),
        Sign::Minus => T::one(),
    };
    x[(0, i)] = T::one();
    x[(i, 0)] = T::one();
    x[(1, i)] = s;
    x[(i, 1)] = -s;
    x
}

/// `Σ xᵢ X^±ᵢ` for `x ∈ ℝ^{n−1}`.
pub fn horo_matrix<T: Scalar>(x: &DVector<T>, sign: Sign) -> DMatrix<T> {
    let n = x.len() + 1;
    let mut m = DMatrix::<T>::zeros(n + 1, n + 1);
    for (k, xi) in x.iter().enumerate() {
        m += horo_generator::<T>(n, k + 2, sign) * *xi;
    }
    m
}

/// `exp(Σ xᵢ X^±ᵢ)`, summed exactly since the generator cubes to zero.
pub fn exp_n<T: Scalar>(x: &DVector<T>, sign: Sign) -> GroupElement<T> {
    let n = x.len() + 1;
    let a = horo_matrix(x, sign);
    let a2 = &a * &a;
    GroupElement::from_matrix_unchecked(DMatrix::identity(n + 1, n + 1) + a + a2 * lit::<T>(0.5))
}

/// Pure translation of length `t` along the geodesic through `p₀` in the unit
/// spatial direction `dir ∈ S^{n−1}`.
pub fn boost<T: Scalar>(dir: &DVector<T>, t: T) -> GroupElement<T> {
    let n = dir.len();
    let mut x = DMatrix::<T>::zeros(n + 1, n + 1);
    for i in 0..n {
        x[(0, i + 1)] = dir[i] * t;
        x[(i + 1, 0)] = dir[i] * t;
    }
    GroupElement::from_matrix_unchecked(expm(&x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_is_exact() {
        let g = &(&flow(3, 1.3) * &rot2(3, 0.4)) * &exp_n(&DVector::from_vec(vec![0.2, -0.1]), Sign::Plus);
        let p = &g * &g.inverse();
        assert!((p.mat() - DMatrix::<f64>::identity(4, 4)).norm() < 1e-13);
    }

    #[test]
    fn horospherical_generators_are_nilpotent() {
        let x = horo_matrix(&DVector::from_vec(vec![0.3, 0.7, -0.2]), Sign::Minus);
        assert!((&x * &x * &x).norm() < 1e-15);
        let e = exp_n(&DVector::from_vec(vec![0.3, 0.7, -0.2]), Sign::Minus);
        assert!((e.mat() - expm(&x)).norm() < 1e-13);
    }

    #[test]
    fn reorthonormalize_restores_group() {
        let mut m = flow(4, 2.0).into_matrix();
        m[(2, 3)] += 1e-6;
        let g = GroupElement::from_matrix_unchecked(m).reorthonormalize();
        assert!(g.lorentz_defect() < 1e-13);
    }
}
