//! Dense matrix functions: exponential, logarithm, square root, and rotation
//! angles of orthogonal matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::scalar::{lit, Scalar};

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(a: &DMatrix<T>) -> T {
    let mut best = T::zero();
    for j in 0..a.ncols() {
        let mut s = T::zero();
        for i in 0..a.nrows() {
            s += a[(i, j)].abs();
        }
        best = best.max(s);
    }
    best
}

/// Matrix exponential by scaling and squaring with a Taylor kernel.
pub fn expm<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let n = a.nrows();
    let nrm = norm1(a);
    let half = lit::<T>(0.5);
    let mut s = 0u32;
    let mut scaled = a.clone();
    let mut cur = nrm;
    while cur > half {
        cur *= half;
        s += 1;
    }
    if s > 0 {
        scaled *= lit::<T>(0.5f64.powi(s as i32));
    }
    let eps = T::default_epsilon();
    let mut result = DMatrix::<T>::identity(n, n);
    let mut term = DMatrix::<T>::identity(n, n);
    for k in 1..40 {
        term = &term * &scaled * (T::one() / lit::<T>(k as f64));
        result += &term;
        if norm1(&term) <= eps * norm1(&result) {
            break;
        }
    }
    for _ in 0..s {
        result = &result * &result;
    }
    result
}

/// Principal square root by the product form of the Denman–Beavers iteration.
/// Returns `None` when the iteration breaks down, which happens when the input
/// has eigenvalues on the closed negative real axis.
pub fn sqrtm<T: Scalar>(a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let half = lit::<T>(0.5);
    let quarter = lit::<T>(0.25);
    let mut m = a.clone();
    let mut y = a.clone();
    let tol = T::default_epsilon() * lit::<T>(100.0);
    for _ in 0..100 {
        let minv = m.clone().try_inverse()?;
        if minv.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let factor = (&id + &minv) * half;
        y = &y * &factor;
        m = (&id * lit::<T>(2.0) + &m + &minv) * quarter;
        if (&m - &id).norm() <= tol * lit::<T>(n as f64) {
            return Some(y);
        }
    }
    let resid = (&y * &y - a).norm() / a.norm().max(T::one());
    if resid < lit(1e-6) {
        Some(y)
    } else {
        None
    }
}

/// Principal logarithm by inverse scaling and squaring. Square roots are taken
/// until the argument is close to the identity, then the Gregory series
/// `log A = 2 atanh((A - I)(A + I)⁻¹)` is summed.
pub fn logm<T: Scalar>(a: &DMatrix<T>) -> Option<DMatrix<T>> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let mut cur = a.clone();
    let mut k = 0i32;
    let target = lit::<T>(0.2);
    while (&cur - &id).norm() > target {
        cur = sqrtm(&cur)?;
        k += 1;
        if k > 60 {
            return None;
        }
    }
    let z = (&cur - &id) * (&cur + &id).try_inverse()?;
    let z2 = &z * &z;
    let mut term = z.clone();
    let mut sum = z.clone();
    let eps = T::default_epsilon();
    for j in 1..60 {
        term = &term * &z2;
        let add = &term * (T::one() / lit::<T>((2 * j + 1) as f64));
        sum += &add;
        if add.norm() <= eps * sum.norm().max(eps) {
            break;
        }
    }
    let out = sum * lit::<T>(2.0f64.powi(k + 1));
    if out.iter().all(|v| v.is_finite()) {
        Some(out)
    } else {
        None
    }
}

/// Rotation angles `θ_i ∈ [0, π]` of an orthogonal matrix with determinant one,
/// one per invariant 2-plane, sorted ascending. Odd dimensions contribute no
/// extra zero.
pub fn rotation_angles<T: Scalar>(a: &DMatrix<T>) -> Vec<T> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let planes = n / 2;
    if (a - &id).norm() < lit(0.5) {
        if let Some(x) = logm(a) {
            let skew = (&x - x.transpose()) * lit::<T>(0.5);
            let sq = -(&skew * &skew);
            let sq = (&sq + sq.transpose()) * lit::<T>(0.5);
            let mut ev: Vec<T> = SymmetricEigen::new(sq)
                .eigenvalues
                .iter()
                .map(|v| v.max(T::zero()).sqrt())
                .collect();
            return pair_up(&mut ev, planes);
        }
    }
    let sym = (a + a.transpose()) * lit::<T>(0.5);
    let mut ev: Vec<T> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .map(|c| c.max(-T::one()).min(T::one()).acos())
        .collect();
    pair_up(&mut ev, planes)
}

/// Each rotation plane shows up twice among the eigenvalues; the unpaired
/// fixed axis (odd dimension) is the smallest value and is dropped.
fn pair_up<T: Scalar>(ev: &mut [T], planes: usize) -> Vec<T> {
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut out = Vec::with_capacity(planes);
    for p in 0..planes {
        out.push((ev[2 * p] + ev[2 * p + 1]) * lit::<T>(0.5));
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    out
}

/// Geodesic distance from the identity in SO(m) under `⟨X, Y⟩ = tr(XYᵀ)/2`.
pub fn so_norm_from_identity<T: Scalar>(a: &DMatrix<T>) -> T {
    rotation_angles(a)
        .iter()
        .fold(T::zero(), |acc, t| acc + *t * *t)
        .sqrt()
}

/// Gram–Schmidt on the columns of a square matrix (Euclidean).
pub fn orthonormalize_columns<T: Scalar>(a: &DMatrix<T>) -> DMatrix<T> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let ci: DVector<T> = q.column(i).into_owned();
                let mut cj = q.column_mut(j);
                cj -= ci * proj;
            }
        }
        let nrm = q.column(j).norm();
        let mut cj = q.column_mut(j);
        cj /= nrm;
    }
    q
}

/// Maximum absolute entry.
pub fn max_abs<T: Scalar>(a: &DMatrix<T>) -> T {
    a.iter().fold(T::zero(), |m, v| m.max(v.abs()))
}

/// `‖AᵀA − I‖_max`.
pub fn orthogonality_defect<T: Scalar>(a: &DMatrix<T>) -> T {
    let n = a.ncols();
    max_abs(&(a.transpose() * a - DMatrix::<T>::identity(n, n)))
}

/// The rotation of smallest angle taking the unit vector `from` to the unit
/// vector `to`, acting in their common plane. Antipodal inputs use an
/// arbitrary orthogonal plane.
pub fn minimal_rotation<T: Scalar>(from: &DVector<T>, to: &DVector<T>) -> DMatrix<T> {
    let m = from.len();
    let c = from.dot(to).max(-T::one()).min(T::one());
    let mut w: DVector<T> = to - from * c;
    let mut s = w.norm();
    if s < lit(1e-15) {
        if c > T::zero() {
            return DMatrix::identity(m, m);
        }
        // antipodal: pick any unit vector orthogonal to `from`
        let mut best = 0;
        for i in 0..m {
            if from[i].abs() < from[best].abs() {
                best = i;
            }
        }
        let mut e = DVector::<T>::zeros(m);
        e[best] = T::one();
        w = &e - from * from.dot(&e);
        w /= w.norm();
        s = T::zero();
    } else {
        w /= s;
    }
    // R = I + s (w fᵀ − f wᵀ) + (c − 1)(f fᵀ + w wᵀ)
    let f = from;
    let mut r = DMatrix::<T>::identity(m, m);
    r += (&w * f.transpose() - f * w.transpose()) * s;
    r += (f * f.transpose() + &w * w.transpose()) * (c - T::one());
    r
}
