use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::lorentz::{check_rotation, flow, m_element, sphere_distance};
use crate::{GroupElement, HPoint, Mat, Vector};

/// A closed geodesic of length `L` and holonomy `Λ`, modelled on the axis of
/// `a_t` through `p₀`. Its unit normal bundle is `ℝ × S^{n−2}` modulo
/// `(s, w) ~ (s − L, Λw)`; the normal vector with coordinates `w` at `s` is
/// `(0, 0, w)` at the point `a_s p₀` of the base lift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelClosedGeodesic {
    pub length: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub holonomy: Mat,
}

/// A point of `N¹(γ)`: basepoint parameter in `[0, L)` and unit normal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalFiberPoint {
    pub s: f64,
    #[serde(with = "crate::serde_mat::vector")]
    pub w: Vector,
}

impl ModelClosedGeodesic {
    pub fn new(length: f64, holonomy: Mat) -> Result<Self, GeometryError> {
        if !(length > 0.0) || !length.is_finite() {
            return Err(GeometryError::Invalid(format!("length {length} must be positive")));
        }
        check_rotation(&holonomy, 1e-10)?;
        Ok(Self { length, holonomy })
    }

    /// Trivial holonomy.
    pub fn product(n: usize, length: f64) -> Self {
        Self {
            length,
            holonomy: Mat::identity(n - 1, n - 1),
        }
    }

    /// Dimension `n` of the ambient H^n.
    pub fn n(&self) -> usize {
        self.holonomy.nrows() + 1
    }

    /// `Λ^k` for any integer `k`.
    pub fn holonomy_power(&self, k: i64) -> Mat {
        let m = self.holonomy.nrows();
        let base = if k >= 0 {
            self.holonomy.clone()
        } else {
            self.holonomy.transpose()
        };
        let mut out = Mat::identity(m, m);
        for _ in 0..k.unsigned_abs() {
            out = &out * &base;
        }
        out
    }

    /// Reduces a cover coordinate to the fundamental domain `[0, L)`.
    pub fn normalize(&self, s: f64, w: &Vector) -> NormalFiberPoint {
        let k = (s / self.length).floor();
        let mut s0 = s - k * self.length;
        let mut k = k as i64;
        if s0 >= self.length {
            s0 -= self.length;
            k += 1;
        }
        NormalFiberPoint {
            s: s0,
            w: self.holonomy_power(k) * w,
        }
    }

    /// Deck transformation `T` with `T(a_s p₀) = a_{s+L} p₀` realising the
    /// identification `(s, w) ~ (s − L, Λw)`; equal to `a_L m_{Λ⁻¹}`.
    pub fn deck(&self) -> GroupElement {
        let n = self.n();
        let m = m_element(&self.holonomy.transpose(), 1e-8).expect("holonomy checked at construction");
        &flow(n, self.length) * &m
    }

    /// Point of the base lift at parameter `s`.
    pub fn point(&self, s: f64) -> HPoint {
        HPoint {
            coords: flow(self.n(), s).base_point().coords,
        }
    }

    /// Ambient normal vector of a fiber point on the base lift.
    pub fn normal_vector(&self, x: &NormalFiberPoint) -> Vector {
        let n = self.n();
        let mut v = DVector::zeros(n + 1);
        v.rows_mut(2, n - 1).copy_from(&x.w);
        v
    }

    /// Reads an ambient normal vector at `a_s p₀` back into fiber coordinates.
    pub fn from_normal_vector(&self, s: f64, v: &Vector) -> NormalFiberPoint {
        let n = self.n();
        let back = flow(n, -s).mat() * v;
        let w = back.rows(2, n - 1).into_owned();
        let nw = w.norm();
        self.normalize(s, &(w / nw))
    }

    /// Frame `(γ', e₂ … eₙ)` at parameter `s` of the base lift, as an element
    /// of G.
    pub fn frame(&self, s: f64) -> GroupElement {
        flow(self.n(), s)
    }

    pub fn as_geodesic(&self) -> super::Geodesic {
        super::Geodesic::standard(self.n())
    }

    /// Distance in `N¹(γ)` for the product metric `ds² + dσ²`, minimised over
    /// the three nearest lifts.
    pub fn n1_distance(&self, x: &NormalFiberPoint, y: &NormalFiberPoint) -> f64 {
        let mut best = f64::INFINITY;
        for k in -1i64..=1 {
            let ds = y.s + k as f64 * self.length - x.s;
            let wy = self.holonomy_power(-k) * &y.w;
            let a = sphere_distance(&x.w, &wy);
            best = best.min((ds * ds + a * a).sqrt());
        }
        best
    }
}

/// Parallel transport of `w` along the orientation (or against it if
/// `to < from`) in cover coordinates; the result is expressed in the
/// fundamental domain of `to`.
pub fn parallel_transport(g: &ModelClosedGeodesic, from: f64, to: f64, w: &Vector) -> Vector {
    let k = (to / g.length).floor() as i64 - (from / g.length).floor() as i64;
    g.holonomy_power(k) * w
}

/// One of the two arcs of the closed geodesic between two footpoints.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arc {
    /// Forward from the first point to the second.
    First,
    /// Backward from the first point to the second.
    Second,
}

/// The arc on which `d¹` is measured.
pub const D1_ARC: Arc = Arc::First;

/// Angle between the normals at `x` and `y` after carrying `x` along the
/// chosen arc to the basepoint of `y`.
pub fn fiber_distance_along(g: &ModelClosedGeodesic, x: &NormalFiberPoint, y: &NormalFiberPoint, arc: Arc) -> f64 {
    let l = g.length;
    let to = match arc {
        Arc::First => x.s + (y.s - x.s).rem_euclid(l),
        Arc::Second => x.s - (x.s - y.s).rem_euclid(l),
    };
    let wt = parallel_transport(g, x.s, to, &x.w);
    sphere_distance(&wt, &y.w)
}
