use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::lorentz::{minkowski, GroupElement as G};
use crate::{GroupElement, HPoint, Vector};

/// Hyperbolic distance `2 asinh(‖p − q‖_J / 2)`, accurate for nearby points.
pub fn hdistance(p: &HPoint, q: &HPoint) -> f64 {
    let d = &p.coords - &q.coords;
    let q2 = minkowski(&d, &d).max(0.0);
    2.0 * (q2.sqrt() / 2.0).asinh()
}

/// Unit tangent at `p` pointing toward `q`; `None` when the points coincide.
pub fn unit_toward(p: &HPoint, q: &HPoint) -> Option<Vector> {
    let w = &q.coords + &p.coords * minkowski(&p.coords, &q.coords);
    let nrm = minkowski(&w, &w).max(0.0).sqrt();
    if nrm < 1e-300 || hdistance(p, q) < 1e-15 {
        None
    } else {
        Some(w / nrm)
    }
}

/// `exp_p(v) = cosh|v| p + sinh|v| v/|v|`.
pub fn exp_at(p: &HPoint, v: &Vector) -> HPoint {
    let r = minkowski(v, v).max(0.0).sqrt();
    if r < 1e-300 {
        return p.clone();
    }
    HPoint {
        coords: &p.coords * r.cosh() + v * (r.sinh() / r),
    }
    .normalized()
}

/// Tangent vector at `p` of length `d(p, q)` pointing at `q`.
pub fn log_at(p: &HPoint, q: &HPoint) -> Vector {
    match unit_toward(p, q) {
        Some(u) => u * hdistance(p, q),
        None => Vector::zeros(p.coords.len()),
    }
}

/// Parallel transport of a tangent vector along the segment from `p` to `q`.
pub fn transport(p: &HPoint, q: &HPoint, v: &Vector) -> Vector {
    let pq = minkowski(&p.coords, &q.coords);
    let c = minkowski(v, &q.coords) / (1.0 - pq);
    v + (&p.coords + &q.coords) * c
}

/// Angle in `[0, π]` between two tangent vectors at a common point.
pub fn tangent_angle(u: &Vector, v: &Vector) -> f64 {
    let nu = minkowski(u, u).max(0.0).sqrt();
    let nv = minkowski(v, v).max(0.0).sqrt();
    let a = u / nu - v / nv;
    let b = u / nu + v / nv;
    2.0 * minkowski(&a, &a).max(0.0).sqrt().atan2(minkowski(&b, &b).max(0.0).sqrt())
}

/// The pure translation taking `p₀` to `p` (its differential at `p₀` is
/// parallel transport along the connecting segment).
pub fn translation_to(p: &HPoint) -> GroupElement {
    let k = p.coords.len();
    let spatial = p.coords.rows(1, k - 1).into_owned();
    let s = spatial.norm();
    let mut m = nalgebra::DMatrix::<f64>::identity(k, k);
    if s < 1e-300 {
        return G::from_matrix_unchecked(m);
    }
    let d = spatial / s;
    let c = p.coords[0];
    m[(0, 0)] = c;
    for i in 1..k {
        m[(0, i)] = s * d[i - 1];
        m[(i, 0)] = s * d[i - 1];
        for j in 1..k {
            m[(i, j)] += (c - 1.0) * d[i - 1] * d[j - 1];
        }
    }
    G::from_matrix_unchecked(m)
}

/// An oriented geodesic `s ↦ cosh(s)·base + sinh(s)·dir`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Geodesic {
    #[serde(with = "crate::serde_mat::vector")]
    pub base: Vector,
    #[serde(with = "crate::serde_mat::vector")]
    pub dir: Vector,
}

impl Geodesic {
    pub fn new(base: &HPoint, dir: Vector, tol: f64) -> Result<Self, GeometryError> {
        let nd = minkowski(&dir, &dir);
        let o = minkowski(&dir, &base.coords);
        if (nd - 1.0).abs() > tol || o.abs() > tol {
            return Err(GeometryError::Invalid(format!(
                "direction not a unit tangent (norm² {nd}, ⟨dir, base⟩ {o})"
            )));
        }
        Ok(Self {
            base: base.coords.clone(),
            dir,
        })
    }

    /// Geodesic through `p` and then `q`.
    pub fn through(p: &HPoint, q: &HPoint) -> Result<Self, GeometryError> {
        let u = unit_toward(p, q).ok_or_else(|| GeometryError::Degenerate("coincident points".into()))?;
        Ok(Self {
            base: p.coords.clone(),
            dir: u,
        })
    }

    /// The geodesic traced by the frame `g·Ψ₀` under frame flow.
    pub fn from_frame(g: &GroupElement) -> Self {
        Self {
            base: g.mat().column(0).into_owned(),
            dir: g.mat().column(1).into_owned(),
        }
    }

    /// Axis of `a_t`: the geodesic through `p₀` in direction `e₁`.
    pub fn standard(n: usize) -> Self {
        let mut b = DVector::zeros(n + 1);
        b[0] = 1.0;
        let mut d = DVector::zeros(n + 1);
        d[1] = 1.0;
        Self { base: b, dir: d }
    }

    pub fn n(&self) -> usize {
        self.base.len() - 1
    }

    pub fn point(&self, s: f64) -> HPoint {
        HPoint {
            coords: &self.base * s.cosh() + &self.dir * s.sinh(),
        }
    }

    pub fn tangent(&self, s: f64) -> Vector {
        &self.base * s.sinh() + &self.dir * s.cosh()
    }

    /// Ideal endpoints `(backward, forward)` as null vectors scaled to unit
    /// time component.
    pub fn endpoints(&self) -> (Vector, Vector) {
        let m = &self.base - &self.dir;
        let p = &self.base + &self.dir;
        (&m / m[0], &p / p[0])
    }

    pub fn transformed(&self, g: &GroupElement) -> Self {
        Self {
            base: g.mat() * &self.base,
            dir: g.mat() * &self.dir,
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            base: self.base.clone(),
            dir: -&self.dir,
        }
    }
}

/// Foot of the perpendicular from a point to a geodesic.
#[derive(Clone, Debug)]
pub struct PerpendicularFoot {
    pub s: f64,
    pub distance: f64,
    /// Unit normal at `γ(s)` pointing toward the point (zero if on the line).
    pub normal: Vector,
}

pub fn perpendicular_foot(g: &Geodesic, x: &HPoint) -> PerpendicularFoot {
    let a = -minkowski(&x.coords, &g.base);
    let b = minkowski(&x.coords, &g.dir);
    let s = (b / a).atanh();
    let foot = g.point(s);
    let normal = unit_toward(&foot, x).unwrap_or_else(|| Vector::zeros(x.coords.len()));
    PerpendicularFoot {
        s,
        distance: hdistance(&foot, x),
        normal,
    }
}

/// The common perpendicular of two geodesics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OrthoConnection {
    pub src: Geodesic,
    pub src_param: f64,
    pub dst: Geodesic,
    pub dst_param: f64,
    pub length: f64,
    /// Unit normal at the source footpoint pointing along the connection.
    #[serde(with = "crate::serde_mat::vector")]
    pub foot_src: Vector,
    /// Unit normal at the target footpoint pointing back along the connection.
    #[serde(with = "crate::serde_mat::vector")]
    pub foot_dst: Vector,
}

impl OrthoConnection {
    /// Largest deviation of the connection from orthogonality at its ends.
    pub fn angle_defect(&self) -> f64 {
        let a = minkowski(&self.foot_src, &self.src.tangent(self.src_param)).abs();
        let b = minkowski(&self.foot_dst, &self.dst.tangent(self.dst_param)).abs();
        a.max(b)
    }
}

const ENDPOINT_TOL: f64 = 1e-9;
const INTERSECT_TOL: f64 = 1e-9;

/// Orthogeodesic between two geodesics at positive distance.
///
/// Coincident ideal endpoints are tested first (both shared: `Identical`, one
/// shared: `Asymptotic`). The half-turn about the common perpendicular swaps
/// the endpoints of each geodesic, so the foot on `g1` is the midpoint of the
/// projections of the endpoints of `g2`, and symmetrically.
pub fn orthogeodesic(g1: &Geodesic, g2: &Geodesic) -> Result<OrthoConnection, GeometryError> {
    let (m1, p1) = g1.endpoints();
    let (m2, p2) = g2.endpoints();
    let close = |a: &Vector, b: &Vector| (a - b).norm() < ENDPOINT_TOL;
    let shared = [close(&m1, &m2), close(&m1, &p2), close(&p1, &m2), close(&p1, &p2)];
    if (shared[0] && shared[3]) || (shared[1] && shared[2]) {
        return Err(GeometryError::Identical);
    }
    if shared.iter().any(|&s| s) {
        return Err(GeometryError::Asymptotic);
    }

    let a = (ideal_projection(g1, &m2) + ideal_projection(g1, &p2)) * 0.5;
    let b = (ideal_projection(g2, &m1) + ideal_projection(g2, &p1)) * 0.5;
    if !a.is_finite() || !b.is_finite() {
        return Err(GeometryError::Degenerate("orthogeodesic feet not finite".into()));
    }
    let x1 = g1.point(a);
    let x2 = g2.point(b);
    let length = hdistance(&x1, &x2);
    if length < INTERSECT_TOL {
        return Err(GeometryError::Intersecting { distance: length });
    }
    let foot_src = unit_toward(&x1, &x2).ok_or(GeometryError::Intersecting { distance: length })?;
    let foot_dst = unit_toward(&x2, &x1).ok_or(GeometryError::Intersecting { distance: length })?;
    Ok(OrthoConnection {
        src: g1.clone(),
        src_param: a,
        dst: g2.clone(),
        dst_param: b,
        length,
        foot_src,
        foot_dst,
    })
}

/// Parameter on `g` of the perpendicular projection of the ideal point `xi`
/// (normalised to time component 1): `e^{2s} = ⟨ℓ₋, ξ⟩ / ⟨ℓ₊, ξ⟩` with
/// `ℓ± = base ± dir`. Null products are evaluated as `−|u − v|²/2` on the
/// sphere at infinity to avoid cancellation.
fn ideal_projection(g: &Geodesic, xi: &Vector) -> f64 {
    let n = xi.len() - 1;
    let sphere = |v: &Vector| {
        let u = v.rows(1, n) / v[0];
        let r = u.norm();
        u / r
    };
    let plus = &g.base + &g.dir;
    let minus = &g.base - &g.dir;
    let ux = sphere(xi);
    let qp = plus[0] * (sphere(&plus) - &ux).norm_squared();
    let qm = minus[0] * (sphere(&minus) - &ux).norm_squared();
    0.5 * (qm / qp).ln()
}
