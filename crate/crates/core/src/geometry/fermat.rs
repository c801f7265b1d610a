use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::line::{exp_at, hdistance, tangent_angle, translation_to, unit_toward};
use super::GeometryError;
use crate::lorentz::minkowski;
use crate::HPoint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FermatKind {
    Interior,
    /// The minimiser is the input vertex with this index.
    Vertex(usize),
}

#[derive(Clone, Debug)]
pub struct FermatPoint {
    pub point: HPoint,
    pub kind: FermatKind,
    pub objective: f64,
    /// Angles `∠APB, ∠BPC, ∠CPA` at the returned point (interior case).
    pub angles: [f64; 3],
    pub gradient_norm: f64,
}

const TWO_PI_3: f64 = 2.0 * std::f64::consts::PI / 3.0;

/// Point minimising `|PA| + |PB| + |PC|`.
///
/// A vertex whose angle is at least `2π/3` is the answer; otherwise Newton
/// steps in tangent coordinates (Hessian of `d(·, X)` is
/// `coth d (I − uuᵀ)`) with Armijo backtracking, started at the normalised
/// centroid.
pub fn fermat_point(a: &HPoint, b: &HPoint, c: &HPoint) -> Result<FermatPoint, GeometryError> {
    let pts = [a, b, c];
    for i in 0..3 {
        for j in (i + 1)..3 {
            if hdistance(pts[i], pts[j]) < 1e-12 {
                return Err(GeometryError::Degenerate("coincident vertices".into()));
            }
        }
    }
    let mut vertex_angles = [0.0; 3];
    for i in 0..3 {
        let (Some(u), Some(v)) = (unit_toward(pts[i], pts[(i + 1) % 3]), unit_toward(pts[i], pts[(i + 2) % 3])) else {
            return Err(GeometryError::Degenerate("coincident vertices".into()));
        };
        vertex_angles[i] = tangent_angle(&u, &v);
    }
    if vertex_angles.iter().any(|&t| !(1e-9..=std::f64::consts::PI - 1e-9).contains(&t)) {
        return Err(GeometryError::Degenerate("collinear vertices".into()));
    }
    let objective = |p: &HPoint| pts.iter().map(|x| hdistance(p, x)).sum::<f64>();
    for i in 0..3 {
        if vertex_angles[i] >= TWO_PI_3 {
            let p = pts[i].clone();
            return Ok(FermatPoint {
                objective: objective(&p),
                angles: [0.0; 3],
                gradient_norm: 0.0,
                point: p,
                kind: FermatKind::Vertex(i),
            });
        }
    }

    let n = a.n();
    let mut p = HPoint {
        coords: &a.coords + &b.coords + &c.coords,
    }
    .normalized();
    let mut grad_norm = f64::INFINITY;
    for _ in 0..200 {
        let h = translation_to(&p);
        let hinv = h.inverse();
        let mut grad = DVector::<f64>::zeros(n);
        let mut hess = DMatrix::<f64>::zeros(n, n);
        for x in pts {
            let d = hdistance(&p, x);
            let u = unit_toward(&p, x).ok_or_else(|| GeometryError::Degenerate("iterate hit a vertex".into()))?;
            let cu = (hinv.mat() * u).rows(1, n).into_owned();
            grad -= &cu;
            hess += (DMatrix::identity(n, n) - &cu * cu.transpose()) / d.tanh();
        }
        grad_norm = grad.norm();
        if grad_norm < 1e-14 {
            break;
        }
        let mut step = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&grad),
            None => -grad.clone(),
        };
        // never jump more than halfway to a vertex
        let reach = 0.5 * pts.iter().map(|x| hdistance(&p, x)).fold(f64::INFINITY, f64::min);
        if step.norm() > reach {
            step *= reach / step.norm();
        }
        let f0 = objective(&p);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let mut amb = DVector::zeros(n + 1);
            amb.rows_mut(1, n).copy_from(&(&step * t));
            let q = exp_at(&p, &(h.mat() * amb));
            if objective(&q) <= f0 + 1e-4 * t * slope {
                p = q;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            break;
        }
    }
    let us: Vec<_> = pts.iter().map(|x| unit_toward(&p, x).unwrap()).collect();
    let angles = [
        tangent_angle(&us[0], &us[1]),
        tangent_angle(&us[1], &us[2]),
        tangent_angle(&us[2], &us[0]),
    ];
    debug_assert!(minkowski(&p.coords, &p.coords) < 0.0);
    Ok(FermatPoint {
        objective: objective(&p),
        point: p,
        kind: FermatKind::Interior,
        angles,
        gradient_norm: grad_norm,
    })
}
