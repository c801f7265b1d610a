//! Factorisation `u = n⁺ · b · n⁻` of elements near the identity.

use nalgebra::{DMatrix, DVector, SVD};

use super::algebra::{group_distance, AlgebraElement};
use super::group::{b_element, exp_n, horo_generator, GroupElement, Sign};
use super::linalg::{expm, max_abs};
use super::LorentzError;
use crate::policy::NumericPolicy;
use crate::scalar::{lit, to_f64, Scalar};

/// Chart coordinates `(x⁺, t, m, x⁻)`; `m` is kept as a rotation matrix and
/// updated multiplicatively.
#[derive(Clone, Debug, PartialEq)]
pub struct NanChart<T: Scalar> {
    pub xplus: DVector<T>,
    pub t: T,
    pub m: DMatrix<T>,
    pub xminus: DVector<T>,
}

impl<T: Scalar> NanChart<T> {
    /// The chart origin (all factors equal to the identity).
    pub fn zero(n: usize) -> Self {
        Self {
            xplus: DVector::zeros(n - 1),
            t: T::zero(),
            m: DMatrix::identity(n - 1, n - 1),
            xminus: DVector::zeros(n - 1),
        }
    }
}

/// Result of [`nan_decompose`].
#[derive(Clone, Debug)]
pub struct NanFactors<T: Scalar> {
    pub nplus: GroupElement<T>,
    pub b: GroupElement<T>,
    pub nminus: GroupElement<T>,
    pub chart: NanChart<T>,
    pub iterations: usize,
    /// `max |n⁺ b n⁻ − u|` at exit.
    pub residual: T,
}

fn assemble<T: Scalar>(c: &NanChart<T>) -> (GroupElement<T>, GroupElement<T>, GroupElement<T>) {
    (exp_n(&c.xplus, Sign::Plus), b_element(c.t, &c.m), exp_n(&c.xminus, Sign::Minus))
}

/// Newton iteration on the chart, seeded at the chart origin.
pub fn nan_decompose<T: Scalar>(u: &GroupElement<T>, policy: &NumericPolicy) -> Result<NanFactors<T>, LorentzError> {
    nan_decompose_from(u, NanChart::zero(u.n()), policy)
}

/// Newton iteration on the chart from a caller-supplied starting point.
pub fn nan_decompose_from<T: Scalar>(
    u: &GroupElement<T>,
    start: NanChart<T>,
    policy: &NumericPolicy,
) -> Result<NanFactors<T>, LorentzError> {
    let n = u.n();
    let dist = group_distance(&GroupElement::identity(n), u)?;
    if to_f64(dist) >= policy.nan_radius {
        return Err(LorentzError::NotNearIdentity {
            distance: to_f64(dist),
            threshold: policy.nan_radius,
        });
    }
    let k = n + 1;
    let dm = (n - 1) * (n - 2) / 2;
    let dim = 2 * (n - 1) + 1 + dm;
    let h = AlgebraElement::<T>::h(n).mat().clone();
    let gens_p: Vec<DMatrix<T>> = (2..=n).map(|i| horo_generator(n, i, Sign::Plus)).collect();
    let gens_m: Vec<DMatrix<T>> = (2..=n).map(|i| horo_generator(n, i, Sign::Minus)).collect();
    let mut gens_rot = Vec::with_capacity(dm);
    for a in 2..=n {
        for b in (a + 1)..=n {
            let mut g = DMatrix::<T>::zeros(k, k);
            g[(a, b)] = T::one();
            g[(b, a)] = -T::one();
            gens_rot.push(g);
        }
    }
    let mut c = start;
    let mut residual = T::max_value().unwrap_or(T::one());
    for it in 0..policy.newton_max_iter {
        let (np, b, nm) = assemble(&c);
        let prod = np.mat() * b.mat() * nm.mat();
        let r = &prod - u.mat();
        residual = max_abs(&r);
        if to_f64(residual) < policy.newton_tol {
            return Ok(NanFactors {
                nplus: np,
                b,
                nminus: nm,
                chart: c,
                iterations: it,
                residual,
            });
        }
        let bn = b.mat() * nm.mat();
        let npb = np.mat() * b.mat();
        let mut jac = DMatrix::<T>::zeros(k * k, dim);
        let mut col = 0;
        let mut put = |m: DMatrix<T>, col: usize| {
            for (idx, v) in m.iter().enumerate() {
                jac[(idx, col)] = *v;
            }
        };
        for g in &gens_p {
            put(np.mat() * g * &bn, col);
            col += 1;
        }
        put(&npb * &h * nm.mat(), col);
        col += 1;
        for g in &gens_rot {
            put(&npb * g * nm.mat(), col);
            col += 1;
        }
        for g in &gens_m {
            put(&prod * g, col);
            col += 1;
        }
        let rhs = DVector::from_iterator(k * k, r.iter().map(|v| -*v));
        let svd = SVD::new(jac, true, true);
        let delta = svd
            .solve(&rhs, T::default_epsilon())
            .map_err(|_| LorentzError::NoConvergence {
                iterations: it,
                residual: to_f64(residual),
            })?;
        for i in 0..n - 1 {
            c.xplus[i] += delta[i];
        }
        let dt = delta[n - 1];
        let mut rot = DMatrix::<T>::zeros(n - 1, n - 1);
        let mut idx = n;
        for a in 0..n - 1 {
            for b in (a + 1)..n - 1 {
                rot[(a, b)] = delta[idx];
                rot[(b, a)] = -delta[idx];
                idx += 1;
            }
        }
        c.t += dt;
        c.m = &c.m * expm(&rot);
        for i in 0..n - 1 {
            c.xminus[i] += delta[idx + i];
        }
    }
    Err(LorentzError::NoConvergence {
        iterations: policy.newton_max_iter,
        residual: to_f64(residual),
    })
}

/// Change of basis to `(f₊, e₂, …, eₙ, f₋)` with `f± = (e₀ ± e₁)/√2`.
fn light_cone_basis<T: Scalar>(n: usize) -> DMatrix<T> {
    let k = n + 1;
    let r = T::one() / lit::<T>(2.0).sqrt();
    let mut p = DMatrix::<T>::zeros(k, k);
    p[(0, 0)] = r;
    p[(1, 0)] = r;
    p[(0, n)] = r;
    p[(1, n)] = -r;
    for i in 2..=n {
        p[(i, i - 1)] = T::one();
    }
    p
}

/// Direct factorisation by block Gaussian elimination in the light-cone basis,
/// where `N⁺` is block lower unitriangular, `N⁻` block upper unitriangular and
/// `B` block diagonal. Used as an independent check of the Newton solver.
pub fn nan_by_elimination<T: Scalar>(u: &GroupElement<T>) -> Option<(GroupElement<T>, GroupElement<T>, GroupElement<T>)> {
    let n = u.n();
    let k = n + 1;
    let p = light_cone_basis::<T>(n);
    let a = p.transpose() * u.mat() * &p;
    let d1 = a[(0, 0)];
    if d1.abs() < T::default_epsilon() {
        return None;
    }
    let mut l = DMatrix::<T>::identity(k, k);
    let mut uu = DMatrix::<T>::identity(k, k);
    let mut d = DMatrix::<T>::zeros(k, k);
    d[(0, 0)] = d1;
    for i in 1..k {
        l[(i, 0)] = a[(i, 0)] / d1;
        uu[(0, i)] = a[(0, i)] / d1;
    }
    let mut s = a.view((1, 1), (n, n)).into_owned();
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] -= l[(i + 1, 0)] * d1 * uu[(0, j + 1)];
        }
    }
    let m = n - 1;
    let d2 = s.view((0, 0), (m, m)).into_owned();
    let d2inv = d2.clone().try_inverse()?;
    let s12 = s.view((0, m), (m, 1)).into_owned();
    let s21 = s.view((m, 0), (1, m)).into_owned();
    let l32 = &s21 * &d2inv;
    let u23 = &d2inv * &s12;
    let d3 = s[(m, m)] - (&s21 * &d2inv * &s12)[(0, 0)];
    d.view_mut((1, 1), (m, m)).copy_from(&d2);
    d[(n, n)] = d3;
    for j in 0..m {
        l[(n, j + 1)] = l32[(0, j)];
        uu[(j + 1, n)] = u23[(j, 0)];
    }
    let back = |x: DMatrix<T>| GroupElement::from_matrix_unchecked(&p * x * p.transpose());
    Some((back(l), back(d), back(uu)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lorentz::group::flow;

    #[test]
    fn identity_factors_trivially() {
        let f = nan_decompose(&GroupElement::<f64>::identity(4), &NumericPolicy::F64).unwrap();
        assert!(f.chart.xplus.norm() < 1e-15 && f.chart.t.abs() < 1e-15);
    }

    #[test]
    fn elimination_agrees_with_newton() {
        let u = &(&exp_n(&DVector::from_vec(vec![0.01, -0.02]), Sign::Plus) * &flow(3, 0.02f64))
            * &exp_n(&DVector::from_vec(vec![0.015, 0.005]), Sign::Minus);
        let f = nan_decompose(&u, &NumericPolicy::F64).unwrap();
        let (np, b, nm) = nan_by_elimination(&u).unwrap();
        assert!((np.mat() - f.nplus.mat()).norm() < 1e-12);
        assert!((b.mat() - f.b.mat()).norm() < 1e-12);
        assert!((nm.mat() - f.nminus.mat()).norm() < 1e-12);
        assert!((f.chart.xplus[1] + 0.02).abs() < 1e-12);
        assert!((f.chart.t - 0.02).abs() < 1e-12);
    }
}
