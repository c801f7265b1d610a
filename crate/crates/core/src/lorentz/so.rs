//! Helpers for SO(m): Haar sampling, the involution φ, and small subgroups.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Haar-distributed element of SO(m): QR of a Gaussian matrix with the sign
/// of `diag(R)` absorbed into `Q`, then a column flip onto the `det = 1` coset.
pub fn haar_so<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DMatrix<f64> {
    if m == 0 {
        return DMatrix::identity(0, 0);
    }
    if m == 1 {
        return DMatrix::identity(1, 1);
    }
    let g = DMatrix::<f64>::from_fn(m, m, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..m {
        if r[(j, j)] < 0.0 {
            let mut c = q.column_mut(j);
            c.neg_mut();
        }
    }
    if q.determinant() < 0.0 {
        let mut c = q.column_mut(0);
        c.neg_mut();
    }
    q
}

/// Uniform point of `S^{m−1}`.
pub fn random_unit<R: Rng + ?Sized>(m: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::<f64>::from_fn(m, |_, _| rng.sample(StandardNormal));
        let nrm = v.norm();
        if nrm > 1e-12 {
            return v / nrm;
        }
    }
}

/// `exp` of a random skew matrix of norm `scale` (norm `tr(XXᵀ)/2`).
pub fn random_rotation_near_identity<R: Rng + ?Sized>(m: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    if m < 2 || scale == 0.0 {
        return DMatrix::identity(m, m);
    }
    let mut x = DMatrix::<f64>::zeros(m, m);
    for a in 0..m {
        for b in (a + 1)..m {
            let v: f64 = rng.sample(StandardNormal);
            x[(a, b)] = v;
            x[(b, a)] = -v;
        }
    }
    let nrm = (x.norm_squared() / 2.0).sqrt();
    x *= scale / nrm;
    super::linalg::expm(&x)
}

/// `exp X` for a random `X ∈ 𝔰𝔬(n,1)` of norm `scale`, as an `(n+1)`-square
/// Lorentz matrix.
pub fn random_lorentz_near_identity<R: Rng + ?Sized>(n: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    let k = n + 1;
    let mut x = DMatrix::<f64>::zeros(k, k);
    for i in 1..k {
        let v: f64 = rng.sample(StandardNormal);
        x[(0, i)] = v;
        x[(i, 0)] = v;
        for j in (i + 1)..k {
            let w: f64 = rng.sample(StandardNormal);
            x[(i, j)] = w;
            x[(j, i)] = -w;
        }
    }
    if scale == 0.0 {
        return DMatrix::identity(k, k);
    }
    let nrm = (x.norm_squared() / 2.0).sqrt();
    x *= scale / nrm;
    super::linalg::expm(&x)
}

/// `Z = diag(−1, 1, …, 1)`.
pub fn z_matrix(m: usize) -> DMatrix<f64> {
    let mut z = DMatrix::identity(m, m);
    if m > 0 {
        z[(0, 0)] = -1.0;
    }
    z
}

/// `φ(A) = Z A Z`.
pub fn phi(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut b = a.clone();
    for j in 1..a.ncols() {
        b[(0, j)] = -b[(0, j)];
        b[(j, 0)] = -b[(j, 0)];
    }
    b
}

/// `diag(−1, −1, 1, …, 1)` in SO(m).
pub fn half_turn(m: usize) -> DMatrix<f64> {
    let mut u = DMatrix::identity(m, m);
    u[(0, 0)] = -1.0;
    if m > 1 {
        u[(1, 1)] = -1.0;
    }
    u
}

/// Rotation by `theta` in the plane of coordinates `i`, `j`.
pub fn plane_rotation(m: usize, i: usize, j: usize, theta: f64) -> DMatrix<f64> {
    let mut r = DMatrix::identity(m, m);
    r[(i, i)] = theta.cos();
    r[(j, j)] = theta.cos();
    r[(i, j)] = -theta.sin();
    r[(j, i)] = theta.sin();
    r
}

/// Completes the unit vector `v` to a positively oriented orthonormal basis
/// `[v, E]`; the columns after the first form `E`.
pub fn complete_basis(v: &DVector<f64>) -> DMatrix<f64> {
    let m = v.len();
    let e1 = DVector::from_fn(m, |i, _| if i == 0 { 1.0 } else { 0.0 });
    
    super::linalg::minimal_rotation(&e1, v)
}

/// Positive orthonormal basis of `R^m` whose first columns are `a` and the
/// part of `b` orthogonal to `a` (both normalised). The remaining columns come
/// from Gram–Schmidt on the standard basis, and the last is flipped if needed.
pub fn frame_from_pair(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let m = a.len();
    let mut cands = vec![a.clone(), b.clone()];
    for i in 0..m {
        let mut e = DVector::zeros(m);
        e[i] = 1.0;
        cands.push(e);
    }
    let mut out: Vec<DVector<f64>> = Vec::new();
    for c in &cands {
        if out.len() == m {
            break;
        }
        let mut w = c.clone();
        for _ in 0..2 {
            for o in &out {
                w -= o * o.dot(&w);
            }
        }
        let nrm = w.norm();
        if nrm > 1e-3 || (out.len() < 2 && nrm > 1e-12) {
            out.push(w / nrm);
        }
    }
    let mut k = DMatrix::from_columns(&out);
    if k.determinant() < 0.0 {
        let mut c = k.column_mut(m - 1);
        c *= -1.0;
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn haar_is_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for m in 1..6 {
            let q = haar_so(m, &mut rng);
            assert!(super::super::linalg::orthogonality_defect(&q) < 1e-13);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_mean_trace_vanishes() {
        // E[tr Q] = 0 for Haar measure on SO(m), m >= 3
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 20000;
        let mean: f64 = (0..n).map(|_| haar_so(3, &mut rng).trace()).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.03, "mean trace {mean}");
    }

    #[test]
    fn phi_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = haar_so(4, &mut rng);
        assert!((phi(&phi(&a)) - &a).norm() < 1e-15);
        let z = z_matrix(4);
        assert!((phi(&a) - &z * &a * &z).norm() < 1e-15);
    }

    #[test]
    fn completed_basis_is_positive() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_unit(4, &mut rng);
        let b = complete_basis(&v);
        assert!((b.column(0) - &v).norm() < 1e-14);
        assert!((b.determinant() - 1.0).abs() < 1e-12);
    }
}
