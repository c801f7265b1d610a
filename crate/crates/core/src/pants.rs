//! Good and bad pants: synthesis, connection monodromies, the good/bad
//! dichotomy, third connections of a good curve and average feet.

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{orthogeodesic, GeometryError, Geodesic, ModelClosedGeodesic, NormalFiberPoint};
use crate::lorentz::linalg::{minimal_rotation, so_norm_from_identity};
use crate::lorentz::so::{frame_from_pair, haar_so, half_turn, phi, random_lorentz_near_identity};
use crate::lorentz::{flow, m_element, rewrite, rot2, so_distance, sphere_distance, LorentzError};
use crate::policy::NumericPolicy;
use crate::steiner::{steiner_minimize, tripods_from_steiner, PantsPresentation, Provenance, SteinerConfig, SteinerError, SteinerGraph, Tripods};
use crate::word::{axis_invariants, WordError};
use crate::{GroupElement, Mat, Vector};

#[derive(Debug, Error)]
pub enum PantsError {
    #[error("dimension {n} too small (need at least {min})")]
    DimensionTooSmall { n: usize, min: usize },
    #[error("inconsistent third-connection geometry: {0}")]
    InconsistentGeometry(String),
    #[error("feet are antipodal; spherical midpoint undefined")]
    AntipodalFeet,
    #[error(transparent)]
    Steiner(#[from] SteinerError),
    #[error(transparent)]
    Word(#[from] WordError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
}

/// Length `ℓ` of the connections of the perfect pants of cuff length `2R`:
/// `cosh ℓ = (4 cosh R + 1)/3`.
pub fn perfect_connection_length(r: f64) -> f64 {
    ((4.0 * r.cosh() + 1.0) / 3.0).acosh()
}

/// Distance between adjacent cuff axes of the perfect pants (the seams of
/// its right-angled hexagons): `cosh a = cosh R / (cosh R − 1)`.
pub fn perfect_seam_length(r: f64) -> f64 {
    (r.cosh() / (r.cosh() - 1.0)).acosh()
}

/// `g_i = R(2πi/3)·a_{ℓ_i}·R(π)·X_i·R(2πi/3)`: the Steiner graph sits at
/// `x = y = p₀` with tripods in the `e₁e₂`-plane, and `X_i ∈ SO(n−1)` is the
/// monodromy of connection `i`.
pub fn build_pants_from_connections(
    n: usize,
    lengths: [f64; 3],
    monodromies: [Mat; 3],
    provenance: Provenance,
) -> Result<PantsPresentation, PantsError> {
    if n < 2 {
        return Err(PantsError::DimensionTooSmall { n, min: 2 });
    }
    let mut gs = Vec::with_capacity(3);
    for i in 0..3 {
        let r = rot2(n, 2.0 * PI * i as f64 / 3.0);
        let x = m_element(&monodromies[i], 1e-9)?;
        let g = &(&(&(&r * &flow(n, lengths[i])) * &rot2(n, PI)) * &x) * &r;
        gs.push(g);
    }
    let [g0, g1, g2]: [GroupElement; 3] = gs.try_into().expect("three connections");
    Ok(PantsPresentation {
        n,
        connections: [g0, g1, g2],
        provenance,
    })
}

/// The Fuchsian pants in the `e₁e₂`-plane with all cuffs of length `2R`.
pub fn build_perfect_pants(n: usize, r: f64) -> Result<PantsPresentation, PantsError> {
    let l = perfect_connection_length(r);
    let e = Mat::identity(n.max(2) - 1, n.max(2) - 1);
    build_pants_from_connections(n, [l; 3], [e.clone(), e.clone(), e], Provenance::SyntheticGood)
}

/// Same tripods as the perfect pants, glued with the half turn
/// `diag(−1, −1, 1, …)` on every connection. The two tripods are then joined
/// with opposite cyclic orders, which is the one-holed torus with a single
/// boundary curve of length about `6R`.
pub fn build_bad_pants(n: usize, r: f64) -> Result<PantsPresentation, PantsError> {
    if n < 3 {
        return Err(PantsError::DimensionTooSmall { n, min: 3 });
    }
    let l = perfect_connection_length(r);
    let h = half_turn(n - 1);
    build_pants_from_connections(n, [l; 3], [h.clone(), h.clone(), h], Provenance::SyntheticBad)
}

/// The boundary word of the bad pants surface, `c₂ c₁ c₀` with the middle
/// factor inverted: the product of the three cuffs going once around the hole.
pub fn bad_boundary_word(p: &PantsPresentation) -> GroupElement {
    let [g0, g1, g2] = &p.connections;
    // g₀ g₁⁻¹ g₂ g₀⁻¹ g₁ g₂⁻¹
    let parts = [g0.clone(), g1.inverse(), g2.clone(), g0.inverse(), g1.clone(), g2.inverse()];
    parts.iter().skip(1).fold(parts[0].clone(), |acc, g| &acc * g)
}

/// Right-multiplies each connection by a random element at distance `≤ scale`
/// from the identity; deterministic in `seed`.
pub fn perturb_pants(p: &PantsPresentation, scale: f64, seed: u64) -> PantsPresentation {
    if scale == 0.0 {
        return p.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let connections = p.connections.clone().map(|g| {
        use rand::Rng;
        let s = scale * rng.random_range(0.0..=1.0);
        let u = GroupElement::from_matrix_unchecked(random_lorentz_near_identity(p.n, s, &mut rng));
        (&g * &u).reorthonormalize()
    });
    PantsPresentation {
        n: p.n,
        connections,
        provenance: Provenance::Perturbed,
    }
}

/// Length and monodromy of one cuff.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Cuff {
    pub length: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub monodromy: Mat,
    /// `d(monodromy, e)`.
    pub monodromy_norm: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuffInvariants {
    pub cuffs: [Cuff; 3],
}

impl CuffInvariants {
    /// `|length − 2R| < 2ε` and `d(monodromy, e) < ε`.
    pub fn is_good(&self, i: usize, r: f64, eps: f64) -> bool {
        let c = &self.cuffs[i];
        (c.length - 2.0 * r).abs() < 2.0 * eps && c.monodromy_norm < eps
    }

    pub fn all_good(&self, r: f64, eps: f64) -> bool {
        (0..3).all(|i| self.is_good(i, r, eps))
    }
}

pub fn cuff_invariants(p: &PantsPresentation, policy: &NumericPolicy) -> Result<CuffInvariants, PantsError> {
    let mut out = Vec::with_capacity(3);
    for i in 0..3 {
        let inv = axis_invariants(&p.cuff_word(i), policy)?;
        out.push(Cuff {
            length: inv.t,
            monodromy_norm: so_norm_from_identity(&inv.m_class),
            monodromy: inv.m_class,
        });
    }
    let [a, b, c]: [Cuff; 3] = out.try_into().expect("three cuffs");
    Ok(CuffInvariants { cuffs: [a, b, c] })
}

/// The `[2.., 2..]` block of an element fixing `p₀` and the first frame
/// vector, with the size of the discarded entries.
fn restrict_to_m(g: &GroupElement) -> (Mat, f64) {
    let n = g.n();
    let a = g.mat();
    let block = a.view((2, 2), (n - 1, n - 1)).into_owned();
    let mut off: f64 = (a[(0, 0)] - 1.0).abs().max((a[(1, 1)] - 1.0).abs());
    for j in 0..=n {
        for &i in &[0usize, 1] {
            if i != j {
                off = off.max(a[(i, j)].abs()).max(a[(j, i)].abs());
            }
        }
    }
    (block, off)
}

/// `X` with `E·G(l/2)·R(π)·X = F·G(l/2)` for frames `E` at one end of a
/// segment of length `l` and `F` at the other, both leading with the
/// direction into the segment.
pub fn midpoint_monodromy(e: &GroupElement, f: &GroupElement, l: f64) -> (Mat, f64) {
    let n = e.n();
    let x = &(&(&(&rot2(n, -PI) * &flow(n, -l / 2.0)) * &e.inverse()) * f) * &flow(n, l / 2.0);
    restrict_to_m(&x)
}

/// Connection monodromies `X_i ∈ SO(n−1)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConnectionMonodromies {
    #[serde(with = "mats3")]
    pub x: [Mat; 3],
    /// Largest deviation of the raw `X_i` from fixing the first frame vector.
    pub defect: f64,
}

mod mats3 {
    use super::Mat;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Mat; 3], s: S) -> Result<S::Ok, S::Error> {
        m.iter().map(crate::serde_mat::to_rows).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<[Mat; 3], D::Error> {
        let v: Vec<Vec<Vec<f64>>> = Vec::deserialize(d)?;
        let ms: Vec<Mat> = v
            .iter()
            .map(|r| crate::serde_mat::from_rows(r).map_err(serde::de::Error::custom))
            .collect::<Result<_, _>>()?;
        ms.try_into().map_err(|_| serde::de::Error::custom("expected three matrices"))
    }
}

/// `E_i(x_i)·R(π)·X_i = F_i(x_i)` at the midpoint `x_i` of connection `i`.
pub fn connection_monodromies(p: &PantsPresentation, sg: &SteinerGraph, tripods: &Tripods) -> ConnectionMonodromies {
    let mut xs = Vec::with_capacity(3);
    let mut defect: f64 = 0.0;
    for i in 0..3 {
        let f = &p.connections[i] * &tripods.f(i);
        let (x, d) = midpoint_monodromy(&tripods.e(i), &f, sg.lengths[i]);
        defect = defect.max(d);
        xs.push(x);
    }
    let [a, b, c]: [Mat; 3] = xs.try_into().expect("three");
    ConnectionMonodromies { x: [a, b, c], defect }
}

/// Result of aligning `A ∈ SO(m)` with one of the two involutions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Alignment {
    /// `Q` fixes `e₁`.
    #[serde(with = "crate::serde_mat::matrix")]
    pub q: Mat,
    /// `e` or `diag(−1, −1, 1, …)`.
    #[serde(with = "crate::serde_mat::matrix")]
    pub u: Mat,
    pub bad: bool,
    /// `d(AQ, U)`.
    pub dist: f64,
}

/// Finds `Q` fixing `e₁` with `AQ` as close as possible to `e` or to the half
/// turn: `AQ` is the minimal rotation taking `U e₁` to `A e₁`, times `U`.
pub fn align_to_involution(a: &Mat) -> Alignment {
    let m = a.nrows();
    let mut e1 = DVector::zeros(m);
    e1[0] = 1.0;
    let v = a * &e1;
    let bad = m > 1 && v[0] < 0.0;
    let u = if bad { half_turn(m) } else { Mat::identity(m, m) };
    let target = &u * &e1;
    let r = minimal_rotation(&v, &target);
    let q = (&u * &r * a).transpose();
    Alignment {
        dist: sphere_distance(&v, &target),
        q,
        u,
        bad,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyConfig {
    /// Multiplier on the `7ε` threshold.
    pub slack: f64,
    pub steiner: SteinerConfig,
    /// Seed for random completions `E`, `F` of the tripod frames.
    pub gauge_seed: Option<u64>,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        Self {
            slack: 1.2,
            steiner: SteinerConfig::default(),
            gauge_seed: None,
        }
    }
}

/// Aligned monodromies and their distances to the chosen involution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    #[serde(with = "mats3")]
    pub aligned: [Mat; 3],
    pub distances: [f64; 3],
    /// `max distances`.
    pub value: f64,
    pub threshold: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Verdict {
    Good(Certificate),
    Bad(Certificate),
    NotCuffGood { cuffs: CuffInvariants },
    Unresolved { reason: String, to_identity: f64, to_half_turn: f64 },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Good(_) => "good",
            Verdict::Bad(_) => "bad",
            Verdict::NotCuffGood { .. } => "not-cuff-good",
            Verdict::Unresolved { .. } => "unresolved",
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub cuffs: CuffInvariants,
    pub steiner: Option<SteinerGraph>,
    pub monodromies: Option<ConnectionMonodromies>,
}

fn gauges(n: usize, seed: Option<u64>) -> Option<(Mat, Mat)> {
    let seed = seed?;
    if n < 3 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Some((haar_so(n - 2, &mut rng), haar_so(n - 2, &mut rng)))
}

/// The good/bad dichotomy for a pants presentation.
pub fn classify(p: &PantsPresentation, r: f64, eps: f64, cfg: &ClassifyConfig) -> Result<Classification, PantsError> {
    let policy = NumericPolicy::F64;
    let cuffs = cuff_invariants(p, &policy)?;
    if !cuffs.all_good(r, eps) {
        return Ok(Classification {
            verdict: Verdict::NotCuffGood { cuffs: cuffs.clone() },
            cuffs,
            steiner: None,
            monodromies: None,
        });
    }
    let sg = match steiner_minimize(p, &cfg.steiner) {
        Ok(sg) => sg,
        Err(SteinerError::DegenerateTheta { edge, length, graph }) => {
            return Ok(Classification {
                verdict: Verdict::Unresolved {
                    reason: format!("degenerate Steiner graph: edge {edge} has length {length:e}"),
                    to_identity: f64::NAN,
                    to_half_turn: f64::NAN,
                },
                cuffs,
                steiner: Some(*graph),
                monodromies: None,
            })
        }
        Err(e) => return Err(e.into()),
    };
    let g = gauges(p.n, cfg.gauge_seed);
    let tripods = tripods_from_steiner(p, &sg, g.as_ref().map(|(a, b)| (a, b)))?;
    let mono = connection_monodromies(p, &sg, &tripods);
    let align = align_to_involution(&mono.x[0]);
    let aligned = mono.x.clone().map(|x| &x * &align.q);
    let m = p.n - 1;
    let dist_to = |target: &Mat| -> [f64; 3] { [0, 1, 2].map(|i| so_distance(&aligned[i], target)) };
    let to_e = dist_to(&Mat::identity(m, m));
    let to_h = if m > 1 { dist_to(&half_turn(m)) } else { [f64::INFINITY; 3] };
    let max = |d: &[f64; 3]| d.iter().copied().fold(0.0, f64::max);
    let threshold = 7.0 * eps * cfg.slack;
    let cert = |d: [f64; 3]| Certificate {
        aligned: aligned.clone(),
        value: max(&d),
        distances: d,
        threshold,
        slack: cfg.slack,
    };
    let verdict = if max(&to_e) <= threshold && max(&to_e) <= max(&to_h) {
        Verdict::Good(cert(to_e))
    } else if max(&to_h) <= threshold {
        Verdict::Bad(cert(to_h))
    } else {
        Verdict::Unresolved {
            reason: "aligned monodromies near neither involution".into(),
            to_identity: max(&to_e),
            to_half_turn: max(&to_h),
        }
    };
    Ok(Classification {
        verdict,
        cuffs,
        steiner: Some(sg),
        monodromies: Some(mono),
    })
}

/// Data of a third connection `η` of a closed geodesic `γ₀`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThirdConnection {
    pub gamma0: ModelClosedGeodesic,
    /// `(s_A, η'(A))`.
    pub foot_a: NormalFiberPoint,
    /// `(s_B, −η'(B))`.
    pub foot_b: NormalFiberPoint,
    /// Length of `η`.
    pub length: f64,
    /// The monodromy `Y` of `η` at its midpoint.
    #[serde(with = "crate::serde_mat::matrix")]
    pub y: Mat,
}

/// Monodromies read off the frames of a third connection and the cuff data
/// they predict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThirdConnectionMonodromies {
    #[serde(with = "crate::serde_mat::matrix")]
    pub x1: Mat,
    #[serde(with = "crate::serde_mat::matrix")]
    pub x2: Mat,
    #[serde(with = "crate::serde_mat::matrix")]
    pub y: Mat,
    /// `X₂⁻¹φ(X₁)`, `X₁⁻¹φ(Y)`, `Y⁻¹φ(X₂)` for `γ₀`, `γ₁`, `γ₂`.
    #[serde(with = "mats3")]
    pub predicted: [Mat; 3],
    /// `L`, `u₁ + w − 2 ln 2`, `u₂ + w − 2 ln 2`.
    pub predicted_lengths: [f64; 3],
    /// Angle between `η'(A)` and `−η'(B)` transported along the first arc.
    pub feet_gap: f64,
    /// Deck transformation of `γ₀` and the element carried by `γ₁`.
    pub t_word: GroupElement,
    pub s_word: GroupElement,
    /// Words for `γ₀`, `γ₁`, `γ₂` conjugated by `flow(c_i)`, where `c_i` is
    /// the midpoint of the arc the cuff runs along, so that their axes pass
    /// near `p₀`.
    pub centered: [GroupElement; 3],
    pub centers: [f64; 3],
    /// `S = a_{s_A} · core · a_{−s_B}`.
    pub s_core: GroupElement,
    pub feet_s: [f64; 2],
}

impl ThirdConnectionMonodromies {
    /// Words for `γ₀`, `γ₁`, `γ₂`: `T`, `S`, `T⁻¹S⁻¹`.
    pub fn cuff_words(&self) -> [GroupElement; 3] {
        let g2 = &self.t_word.inverse() * &self.s_word.inverse();
        [self.t_word.clone(), self.s_word.clone(), g2]
    }

    /// The pants group as a presentation `(e, T⁻¹, S)`, whose cuff words are
    /// `T⁻¹S⁻¹`, `S`, `T`.
    pub fn presentation(&self) -> PantsPresentation {
        let n = self.t_word.n();
        PantsPresentation {
            n,
            connections: [GroupElement::identity(n), self.t_word.inverse(), self.s_word.clone()],
            provenance: Provenance::External,
        }
    }

    /// [`Self::presentation`] conjugated by the flow to the middle of the two
    /// arc midpoints, so every cuff axis passes within about `L/4` of `p₀`
    /// and the words keep their precision.
    pub fn presentation_centered(&self) -> PantsPresentation {
        let n = self.t_word.n();
        let c = 0.5 * (self.centers[1] + self.centers[2]);
        let [sa, sb] = self.feet_s;
        let s = product(&[flow(n, sa - c), self.s_core.clone(), flow(n, c - sb)]);
        PantsPresentation {
            n,
            connections: [GroupElement::identity(n), self.t_word.inverse(), s],
            provenance: Provenance::External,
        }
    }

    /// Length and monodromy of the three cuffs, read from the centred words.
    pub fn actual_cuffs(&self) -> Result<[Cuff; 3], PantsError> {
        let mut out = Vec::with_capacity(3);
        for w in &self.centered {
            let inv = axis_invariants(w, &NumericPolicy::F64)?;
            out.push(Cuff {
                length: inv.t,
                monodromy_norm: so_norm_from_identity(&inv.m_class),
                monodromy: inv.m_class,
            });
        }
        let [a, b, c]: [Cuff; 3] = out.try_into().expect("three cuffs");
        Ok([a, b, c])
    }
}

fn normal_coords(w: &Vector) -> Vector {
    let m = w.len();
    let mut v = DVector::zeros(m + 1);
    v.rows_mut(1, m).copy_from(w);
    v
}

/// Rotation part `K` of the frame at a point of the axis with first vector
/// the normal `w` and second vector `sign·γ₀'`, completed positively and
/// rotated by `gauge`.
fn fiber_rotation(n: usize, w: &Vector, sign: f64, gauge: Option<&Mat>) -> Result<GroupElement, PantsError> {
    let first = normal_coords(w);
    let mut second = DVector::zeros(n);
    second[0] = sign;
    let mut k = frame_from_pair(&first, &second);
    if let Some(g) = gauge {
        let rest = k.columns(2, n - 2).into_owned() * g;
        k.columns_mut(2, n - 2).copy_from(&rest);
    }
    Ok(rewrite(&k, 1e-9)?)
}

fn product(parts: &[GroupElement]) -> GroupElement {
    parts.iter().skip(1).fold(parts[0].clone(), |acc, g| &acc * g)
}

/// Monodromies `X₁`, `X₂` of the arcs of `γ₀` cut by `η`, and the cuff data
/// of the pants generated by `γ₀` and `η`.
///
/// With `E₀ = a_{s_A} K_A` and `F₀ = a_{s_B} K_B` (frames `(η'(A), −γ₀'(A), E)`
/// and `(−η'(B), −γ₀'(B), F)`), the second end of `η` is `S·B` with
/// `S = E₀ G(l) R(π) Y F₀⁻¹`; `γ₁ ↔ S`, `γ₂ ↔ T⁻¹S⁻¹` and `γ₀ ↔ T`.
pub fn third_connection_analysis(tc: &ThirdConnection, gauge: Option<(&Mat, &Mat)>) -> Result<ThirdConnectionMonodromies, PantsError> {
    let g = &tc.gamma0;
    let n = g.n();
    if n < 2 {
        return Err(PantsError::DimensionTooSmall { n, min: 2 });
    }
    let big_l = g.length;
    let (sa, sb) = (tc.foot_a.s, tc.foot_b.s);
    let u1 = sb - sa;
    if !(u1 > 0.0 && u1 < big_l) {
        return Err(PantsError::InconsistentGeometry(format!(
            "feet parameters {sa}, {sb} must satisfy 0 < s_B − s_A < L = {big_l}"
        )));
    }
    if !(tc.length > 0.0) {
        return Err(PantsError::InconsistentGeometry(format!("connection length {} must be positive", tc.length)));
    }
    for f in [&tc.foot_a.w, &tc.foot_b.w] {
        if f.len() != n - 1 || (f.norm() - 1.0).abs() > 1e-9 {
            return Err(PantsError::InconsistentGeometry("feet must be unit normals of the right dimension".into()));
        }
    }
    let u2 = big_l - u1;
    let (ge, gf) = match gauge {
        Some((a, b)) => (Some(a), Some(b)),
        None => (None, None),
    };
    let ka = fiber_rotation(n, &tc.foot_a.w, -1.0, ge)?;
    let kb = fiber_rotation(n, &tc.foot_b.w, -1.0, gf)?;
    let ym = m_element(&tc.y, 1e-9)?;
    let lam = m_element(&g.holonomy, 1e-9)?;
    let a = |t: f64| flow(n, t);
    let r = |th: f64| rot2(n, th);
    // E₁ = E₀R(π/2), F₁ = F₀R(−π/2) meet along the first arc;
    // E₂ = E₀R(−π/2) meets T⁻¹F₂ = T⁻¹F₀R(π/2) along the second
    let rel1 = product(&[r(-PI / 2.0), ka.inverse(), a(u1), kb.clone(), r(-PI / 2.0)]);
    let rel2 = product(&[r(PI / 2.0), ka.inverse(), lam.clone(), a(-u2), kb.clone(), r(PI / 2.0)]);
    let (x1, _) = midpoint_monodromy(&GroupElement::identity(n), &rel1, u1);
    let (x2, _) = midpoint_monodromy(&GroupElement::identity(n), &rel2, u2);
    let y = tc.y.clone();
    let predicted = [
        x2.transpose() * phi(&x1),
        x1.transpose() * phi(&y),
        y.transpose() * phi(&x2),
    ];
    let t_word = g.deck();
    let s_core = product(&[ka.clone(), a(tc.length), r(PI), ym.clone(), kb.inverse()]);
    let s_word = product(&[a(sa), s_core.clone(), a(-sb)]);
    let c1 = 0.5 * (sa + sb);
    let c2 = 0.5 * (sa + sb - big_l);
    let centered = [
        t_word.clone(),
        product(&[a(-u1 / 2.0), ka.clone(), a(tc.length), r(PI), ym.clone(), kb.inverse(), a(-u1 / 2.0)]),
        product(&[lam, a(-u2 / 2.0), kb, ym.inverse(), r(-PI), a(-tc.length), ka.inverse(), a(-u2 / 2.0)]),
    ];
    let ln4 = 2.0 * 2f64.ln();
    Ok(ThirdConnectionMonodromies {
        feet_gap: sphere_distance(&tc.foot_a.w, &tc.foot_b.w),
        predicted_lengths: [big_l, u1 + tc.length - ln4, u2 + tc.length - ln4],
        x1,
        x2,
        y,
        predicted,
        t_word,
        s_word,
        centered,
        centers: [0.0, c1, c2],
        s_core,
        feet_s: [sa, sb],
    })
}

/// Average and short feet of one side of `γ₀`, with their `N¹` distance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FootPair {
    pub average: NormalFiberPoint,
    pub short: NormalFiberPoint,
    pub drift: f64,
}

fn spherical_midpoint(a: &Vector, b: &Vector) -> Result<Vector, PantsError> {
    let s = a + b;
    let nrm = s.norm();
    if nrm < 1e-9 {
        return Err(PantsError::AntipodalFeet);
    }
    Ok(s / nrm)
}

/// Foot on `γ̃₀` (cover coordinates) of the short orthogeodesic to the axis of
/// `flow(c)·g·flow(−c)`.
fn short_foot(gamma0: &ModelClosedGeodesic, g: &GroupElement, c: f64) -> Result<NormalFiberPoint, PantsError> {
    let inv = axis_invariants(g, &NumericPolicy::F64)?;
    let h = inv.axis.ok_or_else(|| PantsError::InconsistentGeometry("cuff axis unavailable".into()))?;
    let o = orthogeodesic(&gamma0.as_geodesic(), &Geodesic::from_frame(&h))?;
    let s = o.src_param;
    let fr = gamma0.frame(s);
    let local = fr.inverse().mat() * &o.foot_src;
    let w = local.rows(2, gamma0.n() - 1).into_owned();
    let nrm = w.norm();
    Ok(NormalFiberPoint { s: s + c, w: w / nrm })
}

/// Average feet `a₁` (between the feet along the first arc) and `a₂` (along
/// the second), compared with the short feet of the orthogeodesics from `γ̃₀`
/// to the axes of `γ₁` and `γ₂`. All points are in cover coordinates.
pub fn average_feet(tc: &ThirdConnection, data: &ThirdConnectionMonodromies) -> Result<[FootPair; 2], PantsError> {
    let g = &tc.gamma0;
    let big_l = g.length;
    let (sa, sb) = (tc.foot_a.s, tc.foot_b.s);
    let fa_next = g.holonomy.transpose() * &tc.foot_a.w;
    let a1 = NormalFiberPoint {
        s: 0.5 * (sa + sb),
        w: spherical_midpoint(&tc.foot_a.w, &tc.foot_b.w)?,
    };
    let a2 = NormalFiberPoint {
        s: 0.5 * (sa + sb + big_l),
        w: spherical_midpoint(&fa_next, &tc.foot_b.w)?,
    };
    let mut shorts = [short_foot(g, &data.centered[1], data.centers[1])?,
        short_foot(g, &data.centered[2], data.centers[2])?];
    // lift each short foot to the copy nearest an average foot
    let mut out = Vec::new();
    for a in [a1, a2] {
        let mut best: Option<(f64, NormalFiberPoint)> = None;
        for sh in shorts.iter_mut() {
            for k in -2i64..=2 {
                let s = sh.s + k as f64 * big_l;
                let w = g.holonomy_power(-k) * &sh.w;
                let d = ((s - a.s).powi(2) + sphere_distance(&w, &a.w).powi(2)).sqrt();
                if best.as_ref().is_none_or(|b| d < b.0) {
                    best = Some((d, NormalFiberPoint { s, w }));
                }
            }
        }
        let (drift, short) = best.expect("nonempty");
        out.push(FootPair { average: a, short, drift });
    }
    let [p, q]: [FootPair; 2] = out.try_into().expect("two");
    Ok([p, q])
}
