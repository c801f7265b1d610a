//! Steiner (theta) graphs of pants presentations: minimisers of
//! `F(x, y) = Σ d(x, g_i y)` on `H^n × H^n`, and the tripods at their two
//! vertices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{fermat_point, hdistance, orthogeodesic, tangent_angle, translation_to, unit_toward, Geodesic};
use crate::lorentz::so::{frame_from_pair, random_unit};
use crate::lorentz::{boost, rewrite, rot2};
use crate::policy::NumericPolicy;
use crate::word::axis_invariants;
use crate::{GroupElement, HPoint, Mat, Vector};

/// Where a presentation came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    SyntheticGood,
    SyntheticBad,
    Perturbed,
    External,
}

/// Three connection elements; the cuff words are `c_i = g_{i+1} g_{i+2}⁻¹`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PantsPresentation {
    pub n: usize,
    pub connections: [GroupElement; 3],
    pub provenance: Provenance,
}

impl PantsPresentation {
    pub fn cuff_word(&self, i: usize) -> GroupElement {
        let a = &self.connections[(i + 1) % 3];
        let b = &self.connections[(i + 2) % 3];
        a * &b.inverse()
    }

    /// `h g_i h⁻¹`.
    pub fn conjugated(&self, h: &GroupElement) -> Self {
        let hi = h.inverse();
        Self {
            n: self.n,
            connections: self.connections.clone().map(|g| &(h * &g) * &hi),
            provenance: self.provenance,
        }
    }

    /// Total length functional.
    pub fn objective(&self, x: &HPoint, y: &HPoint) -> f64 {
        self.connections.iter().map(|g| hdistance(x, &g.act(y))).sum()
    }
}

#[derive(Debug, Error, Clone)]
pub enum SteinerError {
    #[error("Steiner graph degenerates: connection {edge} has length {length:e}")]
    DegenerateTheta {
        edge: usize,
        length: f64,
        graph: Box<SteinerGraph>,
    },
    #[error("minimisation failed: {0}")]
    Failed(String),
}

/// Minimiser of `F` with its certificates.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteinerGraph {
    #[serde(with = "crate::serde_mat::vector")]
    pub x: Vector,
    #[serde(with = "crate::serde_mat::vector")]
    pub y: Vector,
    pub lengths: [f64; 3],
    pub total: f64,
    /// Angles between consecutive edges at `x` (edges 0–1, 1–2, 2–0).
    pub angles_x: [f64; 3],
    pub angles_y: [f64; 3],
    pub gradient_norm: f64,
    /// Smallest eigenvalue of the finite-difference Hessian at the minimiser.
    pub hessian_min_eig: f64,
    /// Largest distance between minimisers found from the three seeds.
    pub seed_spread: f64,
    pub iterations: usize,
}

impl SteinerGraph {
    pub fn x_point(&self) -> HPoint {
        HPoint { coords: self.x.clone() }
    }

    pub fn y_point(&self) -> HPoint {
        HPoint { coords: self.y.clone() }
    }

    /// Segment `i` from `x` to `g_i y`.
    pub fn segment(&self, p: &PantsPresentation, i: usize) -> Option<Geodesic> {
        Geodesic::through(&self.x_point(), &p.connections[i].act(&self.y_point())).ok()
    }
}

/// Optimiser settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteinerConfig {
    pub gradient_tol: f64,
    pub max_iter: usize,
    /// Edges shorter than this make the graph degenerate.
    pub degenerate_tol: f64,
    /// Seeds must agree to this distance.
    pub seed_agreement: f64,
    pub seed: u64,
}

impl Default for SteinerConfig {
    fn default() -> Self {
        Self {
            gradient_tol: 1e-10,
            max_iter: 500,
            degenerate_tol: 1e-5,
            seed_agreement: 1e-7,
            seed: 0x5eed,
        }
    }
}

struct State {
    hx: GroupElement,
    hy: GroupElement,
}

impl State {
    fn x(&self) -> HPoint {
        self.hx.base_point()
    }
    fn y(&self) -> HPoint {
        self.hy.base_point()
    }
    fn moved(&self, d: &DVector<f64>) -> State {
        let n = self.hx.n();
        let step = |h: &GroupElement, v: DVector<f64>| {
            let r = v.norm();
            if r < 1e-300 {
                h.clone()
            } else {
                h * &boost(&(v / r), r)
            }
        };
        State {
            hx: step(&self.hx, d.rows(0, n).into_owned()),
            hy: step(&self.hy, d.rows(n, n).into_owned()),
        }
    }
}

fn coords(h: &GroupElement, u: &Vector) -> DVector<f64> {
    let n = h.n();
    (h.inverse().mat() * u).rows(1, n).into_owned()
}

fn gradient(p: &PantsPresentation, s: &State) -> DVector<f64> {
    let n = p.n;
    let (x, y) = (s.x(), s.y());
    let mut g = DVector::zeros(2 * n);
    for c in &p.connections {
        if let Some(u) = unit_toward(&x, &c.act(&y)) {
            let cu = coords(&s.hx, &u);
            let mut top = g.rows_mut(0, n);
            top -= cu;
        }
        if let Some(u) = unit_toward(&y, &c.inverse().act(&x)) {
            let cu = coords(&s.hy, &u);
            let mut bot = g.rows_mut(n, n);
            bot -= cu;
        }
    }
    g
}

fn fd_hessian(p: &PantsPresentation, s: &State, h: f64, four_point: bool) -> DMatrix<f64> {
    let d = 2 * p.n;
    let mut hess = DMatrix::zeros(d, d);
    for j in 0..d {
        let mut e = DVector::zeros(d);
        e[j] = 1.0;
        let col = if four_point {
            let g1 = gradient(p, &s.moved(&(&e * h)));
            let g2 = gradient(p, &s.moved(&(&e * -h)));
            let g3 = gradient(p, &s.moved(&(&e * (2.0 * h))));
            let g4 = gradient(p, &s.moved(&(&e * (-2.0 * h))));
            ((g1 - g2) * 8.0 - (g3 - g4)) / (12.0 * h)
        } else {
            (gradient(p, &s.moved(&(&e * h))) - gradient(p, &s.moved(&(&e * -h)))) / (2.0 * h)
        };
        hess.set_column(j, &col);
    }
    (&hess + hess.transpose()) * 0.5
}

fn minimize_from(p: &PantsPresentation, x0: &HPoint, y0: &HPoint, cfg: &SteinerConfig) -> (State, usize, f64) {
    let mut s = State {
        hx: translation_to(x0),
        hy: translation_to(y0),
    };
    let f = |s: &State| p.objective(&s.x(), &s.y());
    let mut gn = f64::INFINITY;
    for it in 0..cfg.max_iter {
        let g = gradient(p, &s);
        gn = g.norm();
        if gn < cfg.gradient_tol {
            return (s, it, gn);
        }
        let hess = fd_hessian(p, &s, 1e-6, false);
        let dir = match hess.clone().cholesky() {
            Some(ch) => -ch.solve(&g),
            None => -g.clone(),
        };
        let slope = g.dot(&dir);
        let mut dir = if slope < 0.0 { dir } else { -g.clone() };
        let len = dir.norm();
        if len > 1.0 {
            dir /= len;
        }
        let slope = g.dot(&dir);
        let f0 = f(&s);
        if -slope < 1e-11 * f0.abs().max(1.0) {
            // decrease below the resolution of F: judge by the gradient
            let cand = s.moved(&dir);
            if gradient(p, &cand).norm() < gn {
                s = cand;
                continue;
            }
            return (s, it, gn);
        }
        let mut t = 1.0;
        let mut moved = false;
        for _ in 0..60 {
            let cand = s.moved(&(&dir * t));
            let fc = f(&cand);
            if !fc.is_finite() {
                t *= 0.5;
                continue;
            }
            if fc <= f0 + 1e-4 * t * slope || (fc <= f0 && t < 1e-6) {
                s = cand;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return (s, it, gn);
        }
        if it % 20 == 19 {
            s.hx = s.hx.reorthonormalize();
            s.hy = s.hy.reorthonormalize();
        }
    }
    (s, cfg.max_iter, gn)
}

fn centroid(points: &[HPoint]) -> HPoint {
    let mut c = points[0].coords.clone() * 0.0;
    for p in points {
        c += &p.coords;
    }
    HPoint { coords: c }.normalized()
}

fn seeds(p: &PantsPresentation, rng: &mut ChaCha8Rng) -> Vec<(HPoint, HPoint)> {
    let n = p.n;
    let o = HPoint::origin(n);
    let inv: Vec<GroupElement> = p.connections.iter().map(|g| g.inverse()).collect();
    let y_for = |x: &HPoint| {
        let pts: Vec<HPoint> = inv.iter().map(|g| g.act(x)).collect();
        match fermat_point(&pts[0], &pts[1], &pts[2]) {
            Ok(f) => f.point,
            Err(_) => centroid(&pts),
        }
    };
    // (i) foot on the axis of c₁ of the short orthogeodesic to the axis of c₂
    let pol = NumericPolicy::F64;
    let foot = (|| {
        let a1 = axis_invariants(&p.cuff_word(1), &pol).ok()?.axis?;
        let a2 = axis_invariants(&p.cuff_word(2), &pol).ok()?.axis?;
        let o = orthogeodesic(&Geodesic::from_frame(&a1), &Geodesic::from_frame(&a2)).ok()?;
        Some(o.src.point(o.src_param))
    })();
    let x1 = foot.unwrap_or_else(|| o.clone());
    let y1 = y_for(&x1);
    // (ii) centroid of the images of the base point
    let x2 = centroid(&p.connections.iter().map(|g| g.act(&o)).collect::<Vec<_>>());
    let y2 = y_for(&x2);
    // (iii) random displacement of (i)
    let jitter = |q: &HPoint, rng: &mut ChaCha8Rng| {
        let d = random_unit(n, rng);
        (&translation_to(q) * &boost(&d, rng.random_range(0.1..0.5))).base_point()
    };
    let x3 = jitter(&x1, rng);
    let y3 = jitter(&y1, rng);
    vec![(x1, y1), (x2, y2), (x3, y3)]
}

fn angles_at(p: &HPoint, targets: &[HPoint]) -> [f64; 3] {
    let u: Vec<Option<Vector>> = targets.iter().map(|t| unit_toward(p, t)).collect();
    let ang = |i: usize, j: usize| match (&u[i], &u[j]) {
        (Some(a), Some(b)) => tangent_angle(a, b),
        _ => f64::NAN,
    };
    [ang(0, 1), ang(1, 2), ang(2, 0)]
}

/// Minimises `F` from three seeds and certifies the result.
pub fn steiner_minimize(p: &PantsPresentation, cfg: &SteinerConfig) -> Result<SteinerGraph, SteinerError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut runs = Vec::new();
    for (x0, y0) in seeds(p, &mut rng) {
        runs.push(minimize_from(p, &x0, &y0, cfg));
    }
    runs.sort_by(|a, b| a.2.partial_cmp(&b.2).unwrap_or(std::cmp::Ordering::Equal));
    let (best, iterations, gn) = &runs[0];
    let (x, y) = (best.x(), best.y());
    let mut spread: f64 = 0.0;
    for (s, _, _) in &runs[1..] {
        spread = spread.max(hdistance(&s.x(), &x)).max(hdistance(&s.y(), &y));
    }
    let ends: Vec<HPoint> = p.connections.iter().map(|g| g.act(&y)).collect();
    let backs: Vec<HPoint> = p.connections.iter().map(|g| g.inverse().act(&x)).collect();
    let lengths = [hdistance(&x, &ends[0]), hdistance(&x, &ends[1]), hdistance(&x, &ends[2])];
    let hess = fd_hessian(p, best, 1e-4, true);
    let min_eig = SymmetricEigen::new(hess).eigenvalues.min();
    let graph = SteinerGraph {
        lengths,
        total: lengths.iter().sum(),
        angles_x: angles_at(&x, &ends),
        angles_y: angles_at(&y, &backs),
        gradient_norm: *gn,
        hessian_min_eig: min_eig,
        seed_spread: spread,
        iterations: *iterations,
        x: x.coords,
        y: y.coords,
    };
    let (edge, length) = lengths
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &l)| if l < acc.1 { (i, l) } else { acc });
    if length < cfg.degenerate_tol {
        return Err(SteinerError::DegenerateTheta {
            edge,
            length,
            graph: Box::new(graph),
        });
    }
    Ok(graph)
}

/// Outcome of [`convexity_probe`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub strict: usize,
    /// Smallest `(F(a) + F(b))/2 − F(mid)` observed.
    pub min_margin: f64,
    pub margins: Vec<f64>,
}

/// Compares `F` at geodesic midpoints with the average of the endpoint values
/// on random segments of length up to `scale` around `center`.
pub fn convexity_probe(
    p: &PantsPresentation,
    center: (&HPoint, &HPoint),
    scale: f64,
    trials: usize,
    seed: u64,
) -> ConvexityReport {
    let n = p.n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hx = translation_to(center.0);
    let hy = translation_to(center.1);
    let mut margins = Vec::with_capacity(trials);
    let mut strict = 0;
    for _ in 0..trials {
        let off = |h: &GroupElement, rng: &mut ChaCha8Rng| {
            let d = random_unit(n, rng);
            (h * &boost(&d, rng.random_range(0.0..1.0))).base_point()
        };
        let ax = off(&hx, &mut rng);
        let ay = off(&hy, &mut rng);
        let dx = random_unit(n, &mut rng);
        let dy = random_unit(n, &mut rng);
        let lx = scale * rng.random_range(0.2..1.0);
        let ly = scale * rng.random_range(0.2..1.0);
        let tx = translation_to(&ax);
        let ty = translation_to(&ay);
        let bx = (&tx * &boost(&dx, lx)).base_point();
        let by = (&ty * &boost(&dy, ly)).base_point();
        let mx = (&tx * &boost(&dx, lx / 2.0)).base_point();
        let my = (&ty * &boost(&dy, ly / 2.0)).base_point();
        let m = 0.5 * (p.objective(&ax, &ay) + p.objective(&bx, &by)) - p.objective(&mx, &my);
        if m > 0.0 {
            strict += 1;
        }
        margins.push(m);
    }
    ConvexityReport {
        trials,
        strict,
        min_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
        margins,
    }
}

/// Tripods at the two vertices and the frames `E₀` at `x`, `F₀` at `y`.
#[derive(Clone, Debug)]
pub struct Tripods {
    /// Unit tangents at `x` toward `g_i y`.
    pub at_x: [Vector; 3],
    /// Unit tangents at `y` toward `g_i⁻¹ x` (that is `−η_i'(y)`).
    pub at_y: [Vector; 3],
    /// `E₀ = (v₀, v₀^⊥, E)` with `(v₀, v₀^⊥)` positive for the orientation
    /// given by the cyclic order, so `v₀^⊥` is at `π/6` to `v₁`.
    pub frame_e: GroupElement,
    /// `F₀ = (u₀, u₀^⊥, F)` for the tripod `(u₀, u₁, u₂) = (−η₀', −η₂', −η₁')`
    /// at `y`: connection `i` arrives along `u_{−i}`.
    pub frame_f: GroupElement,
}

impl Tripods {
    /// `E_i = (v_i, v_i^⊥, E) = E₀·R(−2πi/3)`.
    pub fn e(&self, i: usize) -> GroupElement {
        let n = self.frame_e.n();
        &self.frame_e * &rot2(n, -2.0 * std::f64::consts::PI * i as f64 / 3.0)
    }

    /// The frame `(u_{−i}, u_{−i}^⊥, F) = F₀·R(2πi/3)` where connection `i`
    /// arrives.
    pub fn f(&self, i: usize) -> GroupElement {
        let n = self.frame_f.n();
        &self.frame_f * &rot2(n, 2.0 * std::f64::consts::PI * i as f64 / 3.0)
    }
}

/// Positive frame at the base of `h` whose first two vectors are `a`, `b`
/// and whose remaining vectors are rotated by `gauge ∈ SO(n−2)`.
fn frame_with(h: &GroupElement, a: &Vector, b: &Vector, gauge: Option<&Mat>) -> GroupElement {
    let n = h.n();
    let mut k = frame_from_pair(&coords(h, a), &coords(h, b));
    if let Some(g) = gauge {
        let rest = k.columns(2, n - 2).into_owned() * g;
        k.columns_mut(2, n - 2).copy_from(&rest);
    }
    h * &rewrite(&k, 1e-8).expect("orthonormal by construction")
}

/// Builds the tripods of a Steiner graph. `gauge` optionally rotates the
/// arbitrary completions `E`, `F` by elements of SO(n−2).
pub fn tripods_from_steiner(
    p: &PantsPresentation,
    sg: &SteinerGraph,
    gauge: Option<(&Mat, &Mat)>,
) -> Result<Tripods, SteinerError> {
    let x = sg.x_point();
    let y = sg.y_point();
    let fail = || SteinerError::Failed("coincident tripod endpoints".into());
    let mut at_x = Vec::new();
    let mut at_y = Vec::new();
    for g in &p.connections {
        at_x.push(unit_toward(&x, &g.act(&y)).ok_or_else(fail)?);
        at_y.push(unit_toward(&y, &g.inverse().act(&x)).ok_or_else(fail)?);
    }
    let s3 = 3f64.sqrt() / 2.0;
    let u0 = (&at_x[1] + &at_x[0] * 0.5) / s3;
    let u0 = normalize_tangent(&x, &at_x[0], &u0);
    let w0 = (&at_y[2] + &at_y[0] * 0.5) / s3;
    let w0 = normalize_tangent(&y, &at_y[0], &w0);
    let hx = translation_to(&x);
    let hy = translation_to(&y);
    let frame_e = frame_with(&hx, &at_x[0], &u0, gauge.map(|g| g.0));
    let frame_f = frame_with(&hy, &at_y[0], &w0, gauge.map(|g| g.1));
    Ok(Tripods {
        at_x: [at_x[0].clone(), at_x[1].clone(), at_x[2].clone()],
        at_y: [at_y[0].clone(), at_y[1].clone(), at_y[2].clone()],
        frame_e,
        frame_f,
    })
}

/// Removes from `u` its component along `v` and normalises (J-metric on `T_p`).
fn normalize_tangent(p: &HPoint, v: &Vector, u: &Vector) -> Vector {
    use crate::lorentz::minkowski;
    let mut w = u - v * minkowski(u, v);
    w += &p.coords * minkowski(&w, &p.coords);
    let q = minkowski(&w, &w).sqrt();
    w / q
}
