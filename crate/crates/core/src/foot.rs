//! Foot measures: diamond regions of third-connection lengths, ball
//! intersection volumes in SO(m), the space of invariants of third
//! connections, good regions, and the estimated average foot measure.

use std::f64::consts::PI;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{ModelClosedGeodesic, NormalFiberPoint};
use crate::lorentz::linalg::{expm, minimal_rotation, so_norm_from_identity};
use crate::lorentz::so::{complete_basis, phi, random_unit};
use crate::lorentz::sphere_distance;
use crate::pants::{third_connection_analysis, PantsError, ThirdConnection};
use crate::{Mat, Vector};

#[derive(Debug, Error)]
pub enum FootError {
    #[error("points too far apart or antipodal for a midpoint extension")]
    AntipodalOrFar,
    #[error("acceptance rate {rate:e} below 1e-6 after {attempts} attempts")]
    AcceptanceTooLow { rate: f64, attempts: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error(transparent)]
    Pants(#[from] PantsError),
}

/// Monte Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    fn from_weights(scale: f64, sum: f64, sum_sq: f64, n: usize) -> Self {
        let nf = n as f64;
        let mean = sum / nf;
        let var = (sum_sq / nf - mean * mean).max(0.0) / (nf - 1.0).max(1.0);
        McEstimate {
            value: scale * mean,
            stderr: scale * var.sqrt(),
            samples: n,
        }
    }
}

pub(crate) fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

// ---------------------------------------------------------------------------
// diamonds

/// `c = 2 ln 2 + 2R`, the centre of both diamond windows.
fn diamond_center(r: f64) -> f64 {
    2.0 * 2f64.ln() + 2.0 * r
}

/// Area for `e^{2y} dx dy` of `{|x + y − c| < 2ε, |l₀ − x + y − c| < 2ε}`.
pub fn diamond_area(r: f64, eps: f64, l0: f64) -> f64 {
    8.0 * (4.0 * r - l0).exp() * ((2.0 * eps).exp() - (-2.0 * eps).exp()).powi(2)
}

/// Area for `e^{2y} dx dy` of `{|2x + y − c| < 2δ, |l₀ − 2x + y − c| < 2δ}`.
pub fn hat_diamond_area(r: f64, delta: f64, l0: f64) -> f64 {
    4.0 * (4.0 * r - l0).exp() * ((2.0 * delta).exp() - (-2.0 * delta).exp()).powi(2)
}

/// Membership in the diamond (`hat = false`) or the hatted diamond.
pub fn in_diamond(r: f64, eps: f64, l0: f64, hat: bool, x: f64, y: f64) -> bool {
    let c = diamond_center(r);
    let k = if hat { 2.0 } else { 1.0 };
    (k * x + y - c).abs() < 2.0 * eps && (l0 - k * x + y - c).abs() < 2.0 * eps
}

/// Plain Monte Carlo of a diamond area over its bounding box.
pub fn diamond_area_mc(r: f64, eps: f64, l0: f64, hat: bool, samples: usize, seed: u64) -> McEstimate {
    let c = diamond_center(r);
    let k = if hat { 2.0 } else { 1.0 };
    // centre of the region in (x, y), half widths of the bounding box
    let (xc, yc) = (l0 / (2.0 * k), c - l0 / 2.0);
    let (hx, hy) = (2.0 * eps / k, 2.0 * eps);
    let mut rng = rng_for(seed, 0);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let x = xc + hx * (2.0 * rng.random::<f64>() - 1.0);
        let y = yc + hy * (2.0 * rng.random::<f64>() - 1.0);
        if in_diamond(r, eps, l0, hat, x, y) {
            let w = (2.0 * y).exp();
            s += w;
            s2 += w * w;
        }
    }
    McEstimate::from_weights(4.0 * hx * hy, s, s2, samples)
}

/// Marginal CDF of the length coordinate `y` on the hatted diamond under
/// `e^{2y} dx dy`: the density is `e^{2y}·max(0, 4δ − |2y − (2c − l₀)|)`.
pub fn hat_diamond_length_cdf(r: f64, delta: f64, l0: f64, y: f64) -> f64 {
    let c = diamond_center(r);
    let mid = c - l0 / 2.0;
    let (lo, hi) = (mid - 2.0 * delta, mid + 2.0 * delta);
    let dens = |t: f64| (2.0 * (t - mid)).exp() * (4.0 * delta - (2.0 * (t - mid)).abs()).max(0.0);
    let integrate = |a: f64, b: f64| {
        if b <= a {
            return 0.0;
        }
        let n = 400;
        let h = (b - a) / n as f64;
        let mut acc = dens(a) + dens(b);
        for i in 1..n {
            acc += dens(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0
    };
    let total = integrate(lo, mid) + integrate(mid, hi);
    let part = if y <= lo {
        0.0
    } else if y >= hi {
        total
    } else if y <= mid {
        integrate(lo, y)
    } else {
        integrate(lo, mid) + integrate(mid, y)
    };
    part / total
}

// ---------------------------------------------------------------------------
// SO(m) volumes

/// `dim SO(m)`.
pub fn so_dim(m: usize) -> usize {
    m * m.saturating_sub(1) / 2
}

/// Volume of the unit ball in `ℝ^k`.
pub fn unit_ball_volume(k: usize) -> f64 {
    match k {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * PI / k as f64 * unit_ball_volume(k - 2),
    }
}

/// Volume of `S^j`.
pub fn sphere_volume(j: usize) -> f64 {
    (j + 1) as f64 * unit_ball_volume(j + 1)
}

/// Volume of SO(m) for `tr(XYᵀ)/2`: `∏_{j=1}^{m−1} Vol(S^j)`.
pub fn so_volume(m: usize) -> f64 {
    (1..m).map(sphere_volume).product()
}

/// Skew matrix with coordinates `c` in the orthonormal basis `E_ab − E_ba`,
/// `a < b`.
pub fn skew_from_coords(m: usize, c: &[f64]) -> Mat {
    let mut x = Mat::zeros(m, m);
    let mut k = 0;
    for a in 0..m {
        for b in (a + 1)..m {
            x[(a, b)] = -c[k];
            x[(b, a)] = c[k];
            k += 1;
        }
    }
    x
}

/// Rotation angles of the skew matrix `ξ`, one per invariant plane.
fn skew_angles(xi: &Mat) -> Vec<f64> {
    let m = xi.nrows();
    if m == 2 {
        return vec![xi[(1, 0)].abs()];
    }
    if m == 3 {
        return vec![(xi.norm_squared() / 2.0).sqrt()];
    }
    let sq = -(xi * xi);
    let sq = (&sq + sq.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sq).eigenvalues.iter().map(|v| v.max(0.0).sqrt()).collect();
    ev.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    (0..m / 2).map(|p| 0.5 * (ev[2 * p] + ev[2 * p + 1])).collect()
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Haar density of `exp` at `ξ ∈ 𝔰𝔬(m)` relative to Lebesgue measure in the
/// orthonormal coordinates: `∏ sinc(μ/2)` over the eigenvalues `iμ` of `ad ξ`.
pub fn exp_jacobian(xi: &Mat) -> f64 {
    let m = xi.nrows();
    let th = skew_angles(xi);
    if m == 3 {
        return sinc(th[0] / 2.0).powi(2);
    }
    let mut mu = Vec::with_capacity(m);
    for t in &th {
        mu.push(*t);
        mu.push(-*t);
    }
    if m % 2 == 1 {
        mu.push(0.0);
    }
    let mut j = 1.0;
    for a in 0..mu.len() {
        for b in (a + 1)..mu.len() {
            j *= sinc((mu[a] + mu[b]) / 2.0).abs();
        }
    }
    j
}

/// `exp` on 𝔰𝔬(m) with Rodrigues for m ≤ 3.
pub fn so_exp(xi: &Mat) -> Mat {
    let m = xi.nrows();
    match m {
        2 => {
            let t = xi[(1, 0)];
            Mat::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()])
        }
        3 => {
            let t = (xi.norm_squared() / 2.0).sqrt();
            let a = sinc(t);
            let b = if t < 1e-6 { 0.5 - t * t / 24.0 } else { (1.0 - t.cos()) / (t * t) };
            Mat::identity(3, 3) + xi * a + (xi * xi) * b
        }
        _ => expm(xi),
    }
}

/// Distance from the identity in SO(m), with closed forms for m ≤ 3.
pub fn so_norm(a: &Mat) -> f64 {
    match a.nrows() {
        0 | 1 => 0.0,
        2 => a[(1, 0)].atan2(a[(0, 0)]).abs(),
        3 => {
            let s = (a - a.transpose()).norm() / (2.0 * 2f64.sqrt());
            let c = (a.trace() - 1.0) / 2.0;
            s.atan2(c)
        }
        _ => so_norm_from_identity(a),
    }
}

/// `d(a, b)` in SO(m).
pub fn so_dist(a: &Mat, b: &Mat) -> f64 {
    so_norm(&(a.transpose() * b))
}

/// Uniform point of the Euclidean `k`-ball of radius `r`.
fn ball_point<R: Rng + ?Sized>(k: usize, r: f64, rng: &mut R) -> Vec<f64> {
    let d = random_unit(k, rng);
    let rad = r * rng.random::<f64>().powf(1.0 / k as f64);
    d.iter().map(|x| x * rad).collect()
}

/// Random element at distance exactly `d` from the identity (for `d < π`).
pub fn so_at_distance<R: Rng + ?Sized>(m: usize, d: f64, rng: &mut R) -> Mat {
    let k = so_dim(m);
    let dir = random_unit(k, rng);
    let c: Vec<f64> = dir.iter().map(|x| x * d).collect();
    so_exp(&skew_from_coords(m, &c))
}

/// `Vol(B_r(e) ∩ B_r(X))` in SO(m) by Monte Carlo in the exponential chart of
/// `B_r(e)`: uniform points of the Euclidean `r`-ball in 𝔰𝔬(m), weighted by
/// the Haar Jacobian. Requires `r < π`, where the chart is injective.
pub fn ball_intersection_volume(x: &Mat, r: f64, samples: usize, seed: u64) -> McEstimate {
    let m = x.nrows();
    let k = so_dim(m);
    assert!(r > 0.0 && r < PI, "radius must lie in (0, π)");
    if so_norm(x) >= 2.0 * r {
        return McEstimate { value: 0.0, stderr: 0.0, samples };
    }
    let mut rng = rng_for(seed, 1);
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..samples {
        let c = ball_point(k, r, &mut rng);
        let xi = skew_from_coords(m, &c);
        let g = so_exp(&xi);
        if so_dist(&g, x) < r {
            let w = exp_jacobian(&xi);
            s += w;
            s2 += w * w;
        }
    }
    McEstimate::from_weights(unit_ball_volume(k) * r.powi(k as i32), s, s2, samples)
}

/// The same volume by plain Haar sampling of SO(m).
pub fn ball_intersection_volume_haar(x: &Mat, r: f64, samples: usize, seed: u64) -> McEstimate {
    let m = x.nrows();
    let mut rng = rng_for(seed, 2);
    let mut hits = 0usize;
    for _ in 0..samples {
        let g = crate::lorentz::so::haar_so(m, &mut rng);
        if so_norm(&g) < r && so_dist(&g, x) < r {
            hits += 1;
        }
    }
    let h = hits as f64;
    McEstimate::from_weights(so_volume(m), h, h, samples)
}

/// Upper bound `2^k V_{k−1} κ^{(k+1)/2} r^{(k−1)/2}` with `κ = 2r − ‖X‖`.
pub fn near_tangent_bound(m: usize, x_norm: f64, r: f64) -> f64 {
    let k = so_dim(m);
    let kappa = 2.0 * r - x_norm;
    if kappa <= 0.0 {
        return 0.0;
    }
    2f64.powi(k as i32) * unit_ball_volume(k - 1) * kappa.powf((k as f64 + 1.0) / 2.0) * r.powf((k as f64 - 1.0) / 2.0)
}

// ---------------------------------------------------------------------------
// fibers

fn householder(a: &Vector) -> Mat {
    let m = a.len();
    Mat::identity(m, m) - a * a.transpose() * 2.0
}

/// Reflection of `y` through `v` on the sphere: the point `m` with `v` the
/// spherical midpoint of `y` and `m`.
pub fn sphere_extend(v: &Vector, y: &Vector) -> Vector {
    v * (2.0 * v.dot(y)) - y
}

/// `m_x(y)`: basepoint `2s_x − s_y` for the lift of `y` nearest `x`, and the
/// sphere point reflected through `x` after transport.
pub fn midpoint_extend(g: &ModelClosedGeodesic, x: &NormalFiberPoint, y: &NormalFiberPoint) -> Result<NormalFiberPoint, FootError> {
    let l = g.length;
    let k = ((x.s - y.s) / l).round() as i64;
    let sy = y.s + k as f64 * l;
    if (x.s - sy).abs() >= l / 2.0 {
        return Err(FootError::AntipodalOrFar);
    }
    let wy = g.holonomy_power(-k) * &y.w;
    if x.w.dot(&wy) <= 0.0 {
        return Err(FootError::AntipodalOrFar);
    }
    let w = sphere_extend(&x.w, &wy);
    Ok(NormalFiberPoint { s: 2.0 * x.s - sy, w: &w / w.norm() })
}

/// `X₁`, `X₂` with `(−a, E)·X₁ = (b, F)` and `Λ·(a, E)·X₂ = (−b, F)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MonodromyPair {
    #[serde(with = "crate::serde_mat::matrix")]
    pub x1: Mat,
    #[serde(with = "crate::serde_mat::matrix")]
    pub x2: Mat,
    /// `W = X₁⁻¹X₂`.
    #[serde(with = "crate::serde_mat::matrix")]
    pub w: Mat,
    /// `f = d(X₁, X₂)`.
    pub f: f64,
}

/// Monodromy pair of two unit normals in one fiber. `E` and `F` default to
/// the canonical completions, with `F` flipped so that `(a, E)` and `(b, F)`
/// are oppositely oriented; `frames` rotates them by elements of SO(m−1).
pub fn monodromy_pair(lambda: &Mat, a: &Vector, b: &Vector, frames: Option<(&Mat, &Mat)>) -> MonodromyPair {
    let m = a.len();
    let mut fa = complete_basis(a);
    let mut fb = complete_basis(b);
    if m > 1 {
        let mut c = fb.column_mut(m - 1);
        c.neg_mut();
    }
    if let Some((ga, gb)) = frames {
        if m > 1 {
            let ra = fa.columns(1, m - 1).into_owned() * ga;
            fa.columns_mut(1, m - 1).copy_from(&ra);
            let rb = fb.columns(1, m - 1).into_owned() * gb;
            fb.columns_mut(1, m - 1).copy_from(&rb);
        }
    }
    let mut neg_a = fa.clone();
    neg_a.column_mut(0).neg_mut();
    let mut neg_b = fb.clone();
    neg_b.column_mut(0).neg_mut();
    let x1 = neg_a.transpose() * &fb;
    let x2 = fa.transpose() * lambda.transpose() * neg_b;
    let w = x1.transpose() * &x2;
    let f = so_dist(&x1, &x2);
    MonodromyPair { x1, x2, w, f }
}

/// A representative of the conjugacy class of `W_v(a, b)`: `H_a Λᵀ H_b` with
/// `H_u = I − 2uuᵀ`.
pub fn w_class(lambda: &Mat, a: &Vector, b: &Vector) -> Mat {
    householder(a) * lambda.transpose() * householder(b)
}

/// Good region parameters for a model cuff `γ₀`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GoodRegionSpec {
    pub r: f64,
    pub eps: f64,
    pub delta: f64,
    pub gamma0: ModelClosedGeodesic,
}

/// A framed third connection `((u, E), (v, F), l, Λ_η)`; `gauge` records the
/// rotations of `E` and `F` away from the canonical frames.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantPoint {
    /// `(s_A, η'(A))`, cover coordinates.
    pub u: NormalFiberPoint,
    /// `(s_B, −η'(B))` with `s_A < s_B < s_A + L`.
    pub v: NormalFiberPoint,
    pub l: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub lambda: Mat,
    #[serde(with = "crate::serde_mat::matrix")]
    pub gauge_u: Mat,
    #[serde(with = "crate::serde_mat::matrix")]
    pub gauge_v: Mat,
}

fn embed1(a: &Mat) -> Mat {
    let k = a.nrows() + 1;
    let mut out = Mat::identity(k, k);
    out.view_mut((1, 1), (k - 1, k - 1)).copy_from(a);
    out
}

impl InvariantPoint {
    pub fn new(u: NormalFiberPoint, v: NormalFiberPoint, l: f64, lambda: Mat) -> Self {
        let k = lambda.nrows().saturating_sub(1);
        Self {
            u,
            v,
            l,
            lambda,
            gauge_u: Mat::identity(k, k),
            gauge_v: Mat::identity(k, k),
        }
    }

    /// `(A, B) ∈ SO(n−2)²`: `E ↦ EA`, `F ↦ FB`, `Λ ↦ A⁻¹ΛB`.
    pub fn gauge(&self, a: &Mat, b: &Mat) -> Self {
        let mut out = self.clone();
        out.gauge_u = &self.gauge_u * a;
        out.gauge_v = &self.gauge_v * b;
        out.lambda = embed1(a).transpose() * &self.lambda * embed1(b);
        out
    }

    /// `Λ` expressed in the canonical frames.
    pub fn canonical_lambda(&self) -> Mat {
        embed1(&self.gauge_u) * &self.lambda * embed1(&self.gauge_v).transpose()
    }

    /// Average foot: spherical and arc midpoint of the feet.
    pub fn average_foot(&self) -> Option<NormalFiberPoint> {
        let s = &self.u.w + &self.v.w;
        let n = s.norm();
        (n > 1e-12).then(|| NormalFiberPoint {
            s: 0.5 * (self.u.s + self.v.s),
            w: s / n,
        })
    }

    /// Gauge-orbit equality: feet and length agree to `tol` and some
    /// `(A, B)` carries one monodromy onto the other to `tol`.
    pub fn same_class(&self, other: &Self, tol: f64) -> bool {
        if (self.u.s - other.u.s).abs() > tol
            || (self.v.s - other.v.s).abs() > tol
            || (self.l - other.l).abs() > tol
            || (&self.u.w - &other.u.w).norm() > tol
            || (&self.v.w - &other.v.w).norm() > tol
        {
            return false;
        }
        let p = self.canonical_lambda();
        let q = other.canonical_lambda();
        match gauge_between(&p, &q) {
            Some((a, b)) => (embed1(&a).transpose() * &p * embed1(&b) - &q).norm() < tol,
            None => false,
        }
    }
}

/// `(A, B)` with `A⁻¹PB ≈ Q`, built so that `A` fixes the first axis and
/// takes `Qe₁` to `Pe₁`; `None` in SO(1) unless `P ≈ Q`.
pub fn gauge_between(p: &Mat, q: &Mat) -> Option<(Mat, Mat)> {
    let m = p.nrows();
    if m < 3 {
        let id = Mat::identity(m.saturating_sub(1), m.saturating_sub(1));
        return Some((id.clone(), id));
    }
    let pe = p.column(0).rows(1, m - 1).into_owned();
    let qe = q.column(0).rows(1, m - 1).into_owned();
    let a = if pe.norm() > 1e-12 && qe.norm() > 1e-12 {
        minimal_rotation(&(&qe / qe.norm()), &(&pe / pe.norm()))
    } else {
        Mat::identity(m - 1, m - 1)
    };
    // A Q e₁ = P e₁, so P⁻¹ A Q fixes e₁
    let bfull = p.transpose() * embed1(&a) * q;
    let b = bfull.view((1, 1), (m - 1, m - 1)).into_owned();
    Some((a, b))
}

/// Everything the good-region predicates look at for one invariant point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Membership {
    /// Lengths of `γ₁`, `γ₂` from their words.
    pub lengths: [f64; 2],
    pub predicted_lengths: [f64; 2],
    /// `d(φ(Y), X₁)`, `d(φ(Y), X₂)`, equal to the predicted monodromy norms.
    pub dist_x: [f64; 2],
    /// Monodromy norms of `γ₁`, `γ₂` from their words.
    pub actual_norms: [f64; 2],
    /// `(s_B − s_A)/2`, the offset of the long foot from the average foot.
    pub half_offset: f64,
    /// Spherical distance from the average foot to a long foot.
    pub half_gap: f64,
}

impl Membership {
    fn lengths_ok(&self, r: f64, eps: f64) -> bool {
        self.lengths.iter().all(|l| (l - 2.0 * r).abs() < 2.0 * eps)
    }

    /// `𝓡_δ`: good new cuff lengths and `φ(Y) ∈ B_δ(X₁) ∩ B_δ(X₂)`.
    pub fn in_r_delta(&self, r: f64, eps: f64, delta: f64) -> bool {
        self.lengths_ok(r, eps) && self.dist_x.iter().all(|d| *d < delta)
    }

    /// `𝓡`: the new cuffs are `(R, ε)`-good.
    pub fn in_r(&self, r: f64, eps: f64) -> bool {
        self.lengths_ok(r, eps) && self.actual_norms.iter().all(|d| *d < eps)
    }

    /// The component of `ρ⁻¹` used for `𝓢`.
    pub fn in_window(&self, l0: f64) -> bool {
        (self.half_offset - l0 / 4.0).abs() < 1.0 && self.half_gap <= PI / 4.0
    }
}

impl GoodRegionSpec {
    pub fn new(r: f64, eps: f64, delta: f64, gamma0: ModelClosedGeodesic) -> Result<Self, FootError> {
        if !(r > 0.0 && eps > 0.0 && delta > 0.0) {
            return Err(FootError::Invalid("R, ε, δ must be positive".into()));
        }
        if gamma0.n() < 3 {
            return Err(FootError::Invalid("foot measures need n ≥ 3".into()));
        }
        Ok(Self { r, eps, delta, gamma0 })
    }

    /// The third connection with the data of `p`, with `v` lifted after `u`.
    pub fn third_connection(&self, p: &InvariantPoint) -> ThirdConnection {
        let g = &self.gamma0;
        let l = g.length;
        let k = ((p.u.s - p.v.s) / l).floor() as i64 + 1;
        let v = NormalFiberPoint {
            s: p.v.s + k as f64 * l,
            w: g.holonomy_power(-k) * &p.v.w,
        };
        ThirdConnection {
            gamma0: g.clone(),
            foot_a: p.u.clone(),
            foot_b: v,
            length: p.l,
            y: p.lambda.clone(),
        }
    }

    pub fn membership(&self, p: &InvariantPoint) -> Result<Membership, FootError> {
        let tc = self.third_connection(p);
        let data = third_connection_analysis(&tc, Some((&p.gauge_u, &p.gauge_v)))?;
        let cuffs = data.actual_cuffs()?;
        let py = phi(&data.y);
        let avg = p.average_foot().ok_or(FootError::AntipodalOrFar)?;
        Ok(Membership {
            lengths: [cuffs[1].length, cuffs[2].length],
            predicted_lengths: [data.predicted_lengths[1], data.predicted_lengths[2]],
            dist_x: [so_dist(&py, &data.x1), so_dist(&py, &data.x2)],
            actual_norms: [cuffs[1].monodromy_norm, cuffs[2].monodromy_norm],
            half_offset: 0.5 * (tc.foot_b.s - tc.foot_a.s),
            half_gap: sphere_distance(&avg.w, &tc.foot_b.w),
        })
    }

    /// `𝓢_δ` membership of the point over its average foot.
    pub fn in_s_delta(&self, p: &InvariantPoint, delta: f64) -> Result<bool, FootError> {
        let m = self.membership(p)?;
        Ok(m.in_window(self.gamma0.length) && m.in_r_delta(self.r, self.eps, delta))
    }

    /// Support radius around `v` of `y ↦ V(W_v(y, m_v(y)), δ)`: the integrand
    /// needs `4·d(y, v) − ‖Λ‖ < 2δ`.
    pub fn support_radius(&self, delta: f64) -> f64 {
        ((2.0 * delta + so_norm(&self.gamma0.holonomy)) / 4.0).min(PI / 4.0)
    }
}

// ---------------------------------------------------------------------------
// fiber density

/// Sampler for points of the cap `{d(y, v) < ρ}` of `S^{m−1}` from uniform
/// variates; the polar angle is stratified.
struct CapSampler {
    m: usize,
    rho: f64,
    area: f64,
    /// CDF table of the polar angle for `m ≥ 4`.
    table: Vec<(f64, f64)>,
}

impl CapSampler {
    fn new(m: usize, rho: f64) -> Self {
        let j = m as i32 - 2;
        let n = 2000;
        let mut table = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        let h = rho / n as f64;
        table.push((0.0, 0.0));
        for i in 1..=n {
            let (a, b) = ((i - 1) as f64 * h, i as f64 * h);
            let mid = 0.5 * (a + b);
            acc += h / 6.0 * (a.sin().powi(j) + 4.0 * mid.sin().powi(j) + b.sin().powi(j));
            table.push((b, acc));
        }
        let area = if m == 2 { 2.0 * rho } else { sphere_volume(m - 2) * acc };
        for e in table.iter_mut() {
            e.1 /= acc;
        }
        Self { m, rho, area, table }
    }

    fn angle(&self, u: f64) -> f64 {
        match self.m {
            2 => self.rho * u,
            3 => (1.0 - u * (1.0 - self.rho.cos())).acos(),
            _ => {
                let i = self.table.partition_point(|e| e.1 < u).clamp(1, self.table.len() - 1);
                let (a, b) = (self.table[i - 1], self.table[i]);
                a.0 + (b.0 - a.0) * (u - a.1) / (b.1 - a.1).max(1e-300)
            }
        }
    }

    fn point(&self, frame: &Mat, u: f64, dir: &Vector) -> Vector {
        let th = self.angle(u);
        let tail = frame.columns(1, self.m - 1) * dir;
        frame.column(0) * th.cos() + tail * th.sin()
    }
}

/// Density estimate `dμ_a/dλ` at one normal vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FiberDensity {
    pub v: NormalFiberPoint,
    /// `Vol(Ŝ^v_δ)`.
    pub volume: McEstimate,
    /// `Vol(L̂_{R,ε})`.
    pub lhat: f64,
    pub density: f64,
    pub stderr: f64,
    /// Density with `L̂_{R, ε ∓ C e^{−R}}` in place of `L̂_{R,ε}`.
    pub density_range: (f64, f64),
    pub cap_radius: f64,
}

/// Settings of [`fiber_density`].
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FiberConfig {
    /// Radial strata of the cap.
    pub cells: usize,
    pub samples: usize,
    pub seed: u64,
    /// `C` in the length slack `C e^{−R}`.
    pub length_slack: f64,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            cells: 16,
            samples: 20_000,
            seed: 0xf007,
            length_slack: 1.0,
        }
    }
}

/// `Vol(Ŝ^v_δ) = ∫ V(W_v(y, m_v(y)), δ) dσ(y)` times `Vol(L̂_{R,ε})`.
///
/// One inner chart sample per outer point `y`; `y` is drawn from the cap
/// carrying the integrand, stratified in the polar angle.
pub fn fiber_density(spec: &GoodRegionSpec, v: &NormalFiberPoint, cfg: &FiberConfig) -> FiberDensity {
    let m = spec.gamma0.n() - 1;
    let delta = spec.delta;
    let rho = spec.support_radius(delta);
    let cap = CapSampler::new(m, rho);
    let frame = complete_basis(&v.w);
    // the model holonomy is the inverse of the monodromy Λ in `W_v`
    let lam = spec.gamma0.holonomy.transpose();
    let k = so_dim(m);
    let cells = cfg.cells.max(1);
    let per = (cfg.samples / cells).max(2);
    let ball = unit_ball_volume(k) * delta.powi(k as i32);
    let mut rng = rng_for(cfg.seed, 7);
    let (mut value, mut var) = (0.0, 0.0);
    for c in 0..cells {
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..per {
            let u = (c as f64 + rng.random::<f64>()) / cells as f64;
            let dir = if m == 2 {
                DVector::from_element(1, if rng.random::<bool>() { 1.0 } else { -1.0 })
            } else {
                random_unit(m - 1, &mut rng)
            };
            let y = cap.point(&frame, u, &dir);
            let mv = sphere_extend(&v.w, &y);
            let w = w_class(&lam, &y, &(-mv));
            let coords = ball_point(k, delta, &mut rng);
            let xi = skew_from_coords(m, &coords);
            if so_dist(&so_exp(&xi), &w) < delta {
                let j = exp_jacobian(&xi);
                s += j;
                s2 += j * j;
            }
        }
        let est = McEstimate::from_weights(cap.area / cells as f64 * ball, s, s2, per);
        value += est.value;
        var += est.stderr * est.stderr;
    }
    let volume = McEstimate {
        value,
        stderr: var.sqrt(),
        samples: per * cells,
    };
    let l0 = spec.gamma0.length;
    let lhat = hat_diamond_area(spec.r, spec.eps, l0);
    let slack = cfg.length_slack * (-spec.r).exp();
    let lo = hat_diamond_area(spec.r, (spec.eps - slack).max(0.0), l0);
    let hi = hat_diamond_area(spec.r, spec.eps + slack, l0);
    FiberDensity {
        v: v.clone(),
        volume,
        lhat,
        density: volume.value * lhat,
        stderr: volume.stderr * lhat,
        density_range: (volume.value * lo, volume.value * hi),
        cap_radius: rho,
    }
}

/// Quasi-uniform mesh of `S^{m−1}`: equally spaced on the circle, a
/// Fibonacci lattice on `S²`, seeded uniform points beyond.
pub fn sphere_mesh(m: usize, cells: usize) -> Vec<Vector> {
    match m {
        2 => (0..cells)
            .map(|i| {
                let t = 2.0 * PI * (i as f64 + 0.5) / cells as f64;
                DVector::from_vec(vec![t.cos(), t.sin()])
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..cells)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / cells as f64;
                    let r = (1.0 - z * z).sqrt();
                    let t = golden * i as f64;
                    DVector::from_vec(vec![r * t.cos(), r * t.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = rng_for(0x5f3e, m as u64);
            (0..cells).map(|_| random_unit(m, &mut rng)).collect()
        }
    }
}

/// Grid over `N¹(γ₀)`: `s_bins` arcs times a sphere mesh.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FootGrid {
    pub s_bins: usize,
    pub sphere_cells: usize,
}

impl FootGrid {
    pub fn points(&self, g: &ModelClosedGeodesic) -> Vec<NormalFiberPoint> {
        let mesh = sphere_mesh(g.n() - 1, self.sphere_cells);
        let mut out = Vec::with_capacity(self.s_bins * mesh.len());
        for i in 0..self.s_bins {
            let s = (i as f64 + 0.5) * g.length / self.s_bins as f64;
            for w in &mesh {
                out.push(NormalFiberPoint { s, w: w.clone() });
            }
        }
        out
    }

    /// Lebesgue measure of one cell.
    pub fn cell_measure(&self, g: &ModelClosedGeodesic) -> f64 {
        g.length / self.s_bins as f64 * sphere_volume(g.n() - 2) / self.sphere_cells as f64
    }
}

/// `μ_a` on a grid, with its quasi-uniformity and invariance diagnostics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: FootGrid,
    pub points: Vec<NormalFiberPoint>,
    pub values: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// `Σ value · cell measure`.
    pub total_mass: f64,
    pub total_stderr: f64,
    /// `max/min` density (an estimate of `B₀²`).
    pub ratio: f64,
    /// `max |d(τv) − d(v)| / stderr` over the grid.
    pub tau_residual: f64,
    /// `max |d(s, Λw) − d(s, w)| / stderr`.
    pub holonomy_residual: f64,
    /// `B₀` against `e^{2R} ε^{(n²−n+2)/2}`.
    pub b0: f64,
    /// Lebesgue measure of one grid cell.
    pub cell_measure: f64,
}

/// `τ(s, w) = (s + 1, −w)` (reduced to the fundamental domain).
pub fn tau(g: &ModelClosedGeodesic, x: &NormalFiberPoint) -> NormalFiberPoint {
    g.normalize(x.s + 1.0, &(-&x.w))
}

/// Evaluates [`fiber_density`] over the grid; every cell uses its own stream.
pub fn estimated_measure(spec: &GoodRegionSpec, grid: &FootGrid, cfg: &FiberConfig) -> DensityEstimate {
    let g = &spec.gamma0;
    let points = grid.points(g);
    let eval = |v: &NormalFiberPoint, i: usize, salt: u64| {
        let c = FiberConfig {
            seed: cfg.seed ^ (salt << 32) ^ i as u64,
            ..*cfg
        };
        fiber_density(spec, v, &c)
    };
    let main: Vec<FiberDensity> = points.par_iter().enumerate().map(|(i, v)| eval(v, i, 1)).collect();
    let taus: Vec<FiberDensity> = points.par_iter().enumerate().map(|(i, v)| eval(&tau(g, v), i, 2)).collect();
    let hols: Vec<FiberDensity> = points
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let w = NormalFiberPoint { s: v.s, w: &g.holonomy * &v.w };
            eval(&w, i, 3)
        })
        .collect();
    let values: Vec<f64> = main.iter().map(|d| d.density).collect();
    let stderrs: Vec<f64> = main.iter().map(|d| d.stderr).collect();
    let cell = grid.cell_measure(g);
    let total_mass = values.iter().sum::<f64>() * cell;
    let total_stderr = stderrs.iter().map(|s| s * s).sum::<f64>().sqrt() * cell;
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let resid = |other: &[FiberDensity]| {
        main.iter()
            .zip(other)
            .map(|(a, b)| (a.density - b.density).abs() / (a.stderr.hypot(b.stderr)).max(1e-300))
            .fold(0.0, f64::max)
    };
    let n = g.n() as f64;
    let scale = (2.0 * spec.r).exp() * spec.eps.powf((n * n - n + 2.0) / 2.0);
    DensityEstimate {
        grid: *grid,
        tau_residual: resid(&taus),
        holonomy_residual: resid(&hols),
        points,
        values,
        stderrs,
        total_mass,
        total_stderr,
        ratio: max / min,
        b0: (max / scale).max(scale / min),
        cell_measure: cell,
    }
}

// ---------------------------------------------------------------------------
// sampling the good region

/// Accepted points and the acceptance rate of the rejection sampler.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegionSample {
    pub points: Vec<InvariantPoint>,
    pub attempts: usize,
    pub acceptance: f64,
}

/// Proposal box for [`sample_good_region`]: a product region containing
/// `𝓢_δ` on which the reference measure is sampled exactly.
struct Proposal {
    t_half: f64,
    l_mid: f64,
    l_half: f64,
    cap: CapSampler,
}

impl Proposal {
    fn new(spec: &GoodRegionSpec, delta: f64) -> Self {
        let l0 = spec.gamma0.length;
        let slack = 0.05 + 4.0 * (-spec.r).exp();
        let rho = (spec.support_radius(delta) + slack).min(PI / 4.0);
        Self {
            t_half: spec.eps + slack,
            l_mid: diamond_center(spec.r) - l0 / 2.0,
            l_half: 2.0 * spec.eps + slack,
            cap: CapSampler::new(spec.gamma0.n() - 1, rho),
        }
    }

    /// A point from the reference measure restricted to the proposal region;
    /// `Y` is Haar on `{φ(Y) ∈ B_δ(X₁)}` by a Jacobian-thinned chart draw.
    fn draw<R: Rng + ?Sized>(&self, spec: &GoodRegionSpec, delta: f64, rng: &mut R) -> Result<Option<InvariantPoint>, FootError> {
        let g = &spec.gamma0;
        let m = g.n() - 1;
        let l0 = g.length;
        let sa = l0 * rng.random::<f64>();
        let a = random_unit(m, rng);
        let t = l0 / 4.0 + self.t_half * (2.0 * rng.random::<f64>() - 1.0);
        // e^{2l} on [l_mid − l_half, l_mid + l_half] by inversion
        let q: f64 = rng.random();
        let e = (4.0 * self.l_half).exp();
        let l = self.l_mid - self.l_half + 0.5 * (1.0 + q * (e - 1.0)).ln();
        let dir = if m == 2 {
            DVector::from_element(1, if rng.random::<bool>() { 1.0 } else { -1.0 })
        } else {
            random_unit(m - 1, rng)
        };
        let b = self.cap.point(&complete_basis(&a), rng.random(), &dir);
        let u = sphere_extend(&a, &b);
        let pu = NormalFiberPoint { s: sa - t, w: &u / u.norm() };
        let pv = NormalFiberPoint { s: sa + t, w: b };
        let mut p = InvariantPoint::new(pu, pv, l, Mat::identity(m, m));
        let tc = spec.third_connection(&p);
        let data = third_connection_analysis(&tc, None)?;
        let k = so_dim(m);
        let xi = skew_from_coords(m, &ball_point(k, delta, rng));
        if rng.random::<f64>() > exp_jacobian(&xi) {
            return Ok(None);
        }
        p.lambda = phi(&(&data.x1 * so_exp(&xi)));
        Ok(Some(p))
    }
}

/// Rejection sampler for `𝓢_δ` (with `δ = spec.delta`).
pub fn sample_good_region(spec: &GoodRegionSpec, count: usize, seed: u64) -> Result<RegionSample, FootError> {
    let prop = Proposal::new(spec, spec.delta);
    let mut rng = rng_for(seed, 11);
    let mut points = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = 2_000_000usize.max(count * 10_000);
    while points.len() < count {
        attempts += 1;
        if attempts > cap {
            let rate = points.len() as f64 / attempts as f64;
            return Err(FootError::AcceptanceTooLow { rate, attempts });
        }
        let Some(p) = prop.draw(spec, spec.delta, &mut rng)? else {
            continue;
        };
        if spec.in_s_delta(&p, spec.delta)? {
            points.push(p);
        }
        if attempts == 100_000 && points.is_empty() {
            return Err(FootError::AcceptanceTooLow { rate: 0.0, attempts });
        }
    }
    Ok(RegionSample {
        acceptance: count as f64 / attempts as f64,
        points,
        attempts,
    })
}

/// Outcome of the containment check `𝓡_{ε−C₀e^{−R}} ⊆ 𝓡 ⊆ 𝓡_{ε+C₀e^{−R}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContainmentReport {
    pub c0: f64,
    pub checked: usize,
    pub inner: usize,
    pub region: usize,
    pub outer: usize,
    /// Points in the inner set but not in `𝓡`, or in `𝓡` but not the outer.
    pub violations: usize,
    /// `max |actual − predicted| · e^R` over lengths and monodromy norms.
    pub measured_c0: f64,
}

/// Samples proposal points around `𝓢_{ε+C₀e^{−R}}` and checks both inclusions.
pub fn containment_check(spec: &GoodRegionSpec, c0: f64, samples: usize, seed: u64) -> Result<ContainmentReport, FootError> {
    let slack = c0 * (-spec.r).exp();
    let (din, dout) = (spec.eps - slack, spec.eps + slack);
    let prop = Proposal::new(spec, dout + 0.02);
    let mut rng = rng_for(seed, 13);
    let mut rep = ContainmentReport {
        c0,
        checked: 0,
        inner: 0,
        region: 0,
        outer: 0,
        violations: 0,
        measured_c0: 0.0,
    };
    while rep.checked < samples {
        let Some(p) = prop.draw(spec, dout + 0.02, &mut rng)? else {
            continue;
        };
        rep.checked += 1;
        let m = spec.membership(&p)?;
        let er = spec.r.exp();
        for i in 0..2 {
            rep.measured_c0 = rep
                .measured_c0
                .max((m.actual_norms[i] - m.dist_x[i]).abs() * er);
        }
        let inner = m.in_r_delta(spec.r, spec.eps, din);
        let region = m.in_r(spec.r, spec.eps);
        let outer = m.in_r_delta(spec.r, spec.eps, dout);
        rep.inner += inner as usize;
        rep.region += region as usize;
        rep.outer += outer as usize;
        if (inner && !region) || (region && !outer) {
            rep.violations += 1;
        }
    }
    Ok(rep)
}

/// Perturbs every coordinate of an invariant point by at most `zeta`.
pub fn perturb_point<R: Rng + ?Sized>(g: &ModelClosedGeodesic, p: &InvariantPoint, zeta: f64, rng: &mut R) -> InvariantPoint {
    let m = g.n() - 1;
    let mut q = p.clone();
    let step = |rng: &mut R| zeta * (2.0 * rng.random::<f64>() - 1.0) / 3f64.sqrt();
    q.u.s += step(rng);
    q.v.s += step(rng);
    q.l += step(rng);
    let rot = |w: &Vector, rng: &mut R| {
        let th = zeta * rng.random::<f64>() / 3f64.sqrt();
        let mut d = random_unit(m, rng);
        d -= w * w.dot(&d);
        let dn = d.norm();
        if dn < 1e-12 {
            return w.clone();
        }
        w * th.cos() + d * (th.sin() / dn)
    };
    q.u.w = rot(&p.u.w, rng);
    q.v.w = rot(&p.v.w, rng);
    let k = so_dim(m);
    let c: Vec<f64> = ball_point(k, zeta / 3f64.sqrt(), rng);
    q.lambda = &p.lambda * so_exp(&skew_from_coords(m, &c));
    q
}

// ---------------------------------------------------------------------------
// counting inequality

/// Best-fit constant for the two-sided counting inequality
/// `(1 − Lζ/ε)·μ(N_{−ζ}B) ≤ C·ν(B) ≤ (1 + Lζ/ε)·μ(N_ζ B)` over a family of
/// sets given as unions of grid cells.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CountingReport {
    pub c_low: f64,
    pub c_high: f64,
    pub consistent: bool,
    pub best_c: f64,
    pub sets: usize,
}

/// `nu[i]` is the point mass in cell `i`; `inner[j]`/`outer[j]` list the
/// cells of `N_{−ζ}B_j` and `N_ζ B_j`, and `sets[j]` the cells of `B_j`.
pub fn counting_check(
    density: &DensityEstimate,
    nu: &[f64],
    sets: &[Vec<usize>],
    inner: &[Vec<usize>],
    outer: &[Vec<usize>],
    factor: f64,
) -> CountingReport {
    let cell = density.cell_measure;
    let mass = |ix: &[usize]| ix.iter().map(|&i| density.values[i]).sum::<f64>() * cell;
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for j in 0..sets.len() {
        let nb: f64 = sets[j].iter().map(|&i| nu[i]).sum();
        if nb <= 0.0 {
            continue;
        }
        lo = lo.max((1.0 - factor) * mass(&inner[j]) / nb);
        hi = hi.min((1.0 + factor) * mass(&outer[j]) / nb);
    }
    CountingReport {
        c_low: lo,
        c_high: hi,
        consistent: lo <= hi,
        best_c: (lo.max(1e-300) * hi).sqrt(),
        sets: sets.len(),
    }
}
