//! Instruction words over SO⁺(n,1), their evaluation, and the conjugacy
//! invariants `(t, [m])` of loxodromic elements: a spectral extraction and
//! the iterative absorption of small perturbations into `a_t m`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lorentz::linalg::{max_abs, rotation_angles};
use crate::lorentz::{
    b_element, conjugate_horospherical, exp_n, flow, group_distance, minkowski, nan_decompose, rewrite, rot2,
    LorentzError, Sign,
};
use crate::policy::NumericPolicy;
use crate::{GroupElement, Mat};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WordError {
    #[error("element is not loxodromic (log spectral radius {log_radius:e})")]
    NotLoxodromic { log_radius: f64 },
    #[error("perturbation at distance {distance} exceeds {limit}")]
    PerturbTooLarge { distance: f64, limit: f64 },
    #[error("flow time {t} below threshold {min}")]
    ShortFlow { t: f64, min: f64 },
    #[error("dimension mismatch: expected n = {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("absorption did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Lorentz(#[from] LorentzError),
}

/// Thresholds of the absorption lemmas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WordConfig {
    /// Minimum flow time `R`.
    pub r_threshold: f64,
    /// Maximum perturbation size `ε₀`.
    pub eps0: f64,
}

impl Default for WordConfig {
    fn default() -> Self {
        Self {
            r_threshold: 8.0,
            eps0: 0.05,
        }
    }
}

/// One right-acting instruction on frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Instruction {
    FrameFlow { t: f64 },
    Rotation2 { theta: f64 },
    Rewrite {
        #[serde(with = "crate::serde_mat::matrix")]
        k: Mat,
    },
    Perturb { g: GroupElement },
}

impl Instruction {
    pub fn element(&self, n: usize, cfg: &WordConfig) -> Result<GroupElement, WordError> {
        Ok(match self {
            Instruction::FrameFlow { t } => flow(n, *t),
            Instruction::Rotation2 { theta } => rot2(n, *theta),
            Instruction::Rewrite { k } => {
                if k.nrows() != n {
                    return Err(WordError::DimensionMismatch {
                        expected: n,
                        found: k.nrows(),
                    });
                }
                rewrite(k, 1e-9)?
            }
            Instruction::Perturb { g } => {
                if g.n() != n {
                    return Err(WordError::DimensionMismatch {
                        expected: n,
                        found: g.n(),
                    });
                }
                let d = group_distance(&GroupElement::identity(n), g)?;
                if d >= cfg.eps0 {
                    return Err(WordError::PerturbTooLarge {
                        distance: d,
                        limit: cfg.eps0,
                    });
                }
                g.clone()
            }
        })
    }

    /// The instruction undoing this one.
    pub fn inverse(&self) -> Self {
        match self {
            Instruction::FrameFlow { t } => Instruction::FrameFlow { t: -t },
            Instruction::Rotation2 { theta } => Instruction::Rotation2 { theta: -theta },
            Instruction::Rewrite { k } => Instruction::Rewrite { k: k.transpose() },
            Instruction::Perturb { g } => Instruction::Perturb { g: g.inverse() },
        }
    }
}

/// Product of the instruction elements in right-action order.
pub fn evaluate(n: usize, word: &[Instruction], cfg: &WordConfig, policy: &NumericPolicy) -> Result<GroupElement, WordError> {
    let mut g = GroupElement::identity(n);
    for ins in word {
        g = g.mul_checked(&ins.element(n, cfg)?, policy.reorthonormalize_at * g.mat().norm().powi(2).max(1.0));
    }
    Ok(g)
}

/// The inverse word.
pub fn inverse_word(word: &[Instruction]) -> Vec<Instruction> {
    word.iter().rev().map(Instruction::inverse).collect()
}

/// Conjugacy invariants `g ~ a_t m`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LoxodromicInvariants {
    pub t: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub m_class: Mat,
    /// A frame `h` on the axis with `h⁻¹ g h ≈ a_t m`, when known.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis: Option<GroupElement>,
}

impl LoxodromicInvariants {
    /// Sorted rotation angles of the monodromy.
    pub fn angles(&self) -> Vec<f64> {
        rotation_angles(&self.m_class)
    }
}

/// Distance between the conjugacy classes of two rotations: Euclidean distance
/// between their sorted rotation-angle lists.
pub fn monodromy_distance(a: &Mat, b: &Mat) -> f64 {
    let x = rotation_angles(a);
    let y = rotation_angles(b);
    x.iter().zip(&y).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt()
}

fn dominant_direction(g: &DMatrix<f64>, log_radius: f64) -> DVector<f64> {
    let k = g.nrows();
    let mut b = g / max_abs(g);
    let mut reach = log_radius;
    while reach < 40.0 {
        b = &b * &b;
        b /= max_abs(&b);
        reach *= 2.0;
    }
    let mut best = 0;
    for j in 0..k {
        if b.column(j).norm() > b.column(best).norm() {
            best = j;
        }
    }
    let mut v = b.column(best).into_owned();
    v /= v.norm();
    for _ in 0..3 {
        let w = g * &v;
        v = &w / w.norm();
    }
    if v[0] < 0.0 {
        v = -v;
    }
    v
}

/// Spectral extraction of `(t, [m])`: the attracting and repelling null
/// eigenvectors span the axis plane; `t` is read off the eigenvalue and `m`
/// is `g` restricted to the J-orthogonal complement.
pub fn axis_invariants(g: &GroupElement, policy: &NumericPolicy) -> Result<LoxodromicInvariants, WordError> {
    let n = g.n();
    let eig = g.mat().complex_eigenvalues();
    let radius = eig.iter().map(|z| z.norm()).fold(0.0f64, f64::max);
    let log_radius = radius.ln();
    if !(log_radius > policy.loxodromic_margin) {
        return Err(WordError::NotLoxodromic { log_radius });
    }
    let ginv = g.inverse();
    let xp = dominant_direction(g.mat(), log_radius);
    let xm = dominant_direction(ginv.mat(), log_radius);
    let grow = |a: &DMatrix<f64>, v: &DVector<f64>| ((a * v).norm() / v.norm()).ln();
    let t = 0.5 * (grow(g.mat(), &xp) + grow(ginv.mat(), &xm));

    // put the endpoints on the sphere at infinity; ⟨ξ₊, ξ₋⟩ = −|u₊ − u₋|²/2
    let sphere = |v: &DVector<f64>| {
        let u = v.rows(1, n) / v[0];
        let r = u.norm();
        let mut out = DVector::zeros(n + 1);
        out[0] = 1.0;
        out.rows_mut(1, n).copy_from(&(u / r));
        out
    };
    let mut xp = sphere(&xp);
    let mut xm = sphere(&xm);
    let c = -0.5 * (xp.rows(1, n) - xm.rows(1, n)).norm_squared();
    if !(c < 0.0) || !t.is_finite() {
        return Err(WordError::NotLoxodromic { log_radius });
    }
    let scale = (2.0 / -c).sqrt();
    xp *= scale;
    xm *= scale;
    let p = (&xp + &xm) * 0.5;
    let v = (&xp - &xm) * 0.5;
    let mut cols = vec![p.clone(), v.clone()];
    let mut candidates: Vec<DVector<f64>> = (0..=n)
        .map(|i| {
            let mut e = DVector::zeros(n + 1);
            e[i] = 1.0;
            
            &e + &p * minkowski(&e, &p) - &v * minkowski(&e, &v)
        })
        .collect();
    candidates.sort_by(|a, b| minkowski(b, b).partial_cmp(&minkowski(a, a)).unwrap());
    for mut w in candidates {
        if cols.len() == n + 1 {
            break;
        }
        for _ in 0..2 {
            for c in cols.iter().skip(2) {
                w -= c * minkowski(&w, c);
            }
        }
        let q = minkowski(&w, &w);
        if q > 1e-4 {
            cols.push(w / q.sqrt());
        }
    }
    let mut h = DMatrix::from_columns(&cols);
    if h.determinant() < 0.0 {
        let mut last = h.column_mut(n);
        last *= -1.0;
    }
    let h = GroupElement::from_matrix_unchecked(h);
    let conj = &(&h.inverse() * g) * &h;
    let m = conj.mat().view((2, 2), (n - 1, n - 1)).into_owned();
    let m = polar(&m);
    // tr g = 2 cosh t + tr m; for long elements the trace pins t far better
    // than the eigenvector growth, whose error grows with the distance of the
    // axis from p₀
    let t = if t > 3.0 {
        ((g.mat().trace() - m.trace()) / 2.0).acosh()
    } else {
        t
    };
    Ok(LoxodromicInvariants {
        t,
        m_class: m,
        axis: Some(h),
    })
}

/// Nearest rotation (polar factor).
fn polar(m: &Mat) -> Mat {
    if m.nrows() == 0 {
        return m.clone();
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    u * vt
}

/// Result of [`absorb_perturbation`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Absorbed {
    pub t: f64,
    #[serde(with = "crate::serde_mat::matrix")]
    pub m: Mat,
    pub iterations: usize,
    /// `max|u_k − I|` per step.
    pub residuals: Vec<f64>,
}

impl Absorbed {
    pub fn invariants(&self) -> LoxodromicInvariants {
        LoxodromicInvariants {
            t: self.t,
            m_class: self.m.clone(),
            axis: None,
        }
    }
}

fn check_flow(t: f64, cfg: &WordConfig) -> Result<(), WordError> {
    if t <= cfg.r_threshold {
        return Err(WordError::ShortFlow {
            t,
            min: cfg.r_threshold,
        });
    }
    Ok(())
}

fn check_small(u: &GroupElement, cfg: &WordConfig) -> Result<(), WordError> {
    let d = group_distance(&GroupElement::identity(u.n()), u)?;
    if d >= cfg.eps0 {
        return Err(WordError::PerturbTooLarge {
            distance: d,
            limit: cfg.eps0,
        });
    }
    Ok(())
}

/// Conjugacy class of `a_t m u` for long `t` and small `u`.
///
/// Each step writes `u = n⁺ b n⁻`, conjugates by `a_{t/2}` so that `n⁺` is
/// pushed out on the left through `a_{t/2} m` and `n⁻` on the right through
/// `a_{t/2}` (both shrink by `e^{−t/2}`), absorbs `b` into `a_t m`, and moves
/// the left factor round cyclically: `u ← n̂⁻ n̂⁺`.
pub fn absorb_perturbation(
    t: f64,
    m: &Mat,
    u: &GroupElement,
    cfg: &WordConfig,
    policy: &NumericPolicy,
) -> Result<Absorbed, WordError> {
    check_flow(t, cfg)?;
    check_small(u, cfg)?;
    absorb_unchecked(t, m.clone(), u.clone(), policy)
}

fn absorb_unchecked(mut t: f64, mut m: Mat, mut u: GroupElement, policy: &NumericPolicy) -> Result<Absorbed, WordError> {
    let n = u.n();
    let id = Mat::identity(n + 1, n + 1);
    let mut residuals = Vec::new();
    for it in 0..policy.absorb_max_iter {
        let r = max_abs(&(u.mat() - &id));
        residuals.push(r);
        if r < policy.absorb_tol {
            return Ok(Absorbed {
                t,
                m,
                iterations: it,
                residuals,
            });
        }
        if it >= 3 && r > 0.5 * residuals[it - 1] {
            break;
        }
        let f = nan_decompose(&u, policy)?;
        let xp = conjugate_horospherical(t / 2.0, &m, &f.chart.xplus, Sign::Plus);
        let id_m = Mat::identity(n - 1, n - 1);
        let xm = conjugate_horospherical(t / 2.0, &id_m, &f.chart.xminus, Sign::Minus);
        t += f.chart.t;
        m = &m * &f.chart.m;
        u = &exp_n(&xm, Sign::Minus) * &exp_n(&xp, Sign::Plus);
    }
    Err(WordError::NoConvergence {
        iterations: residuals.len(),
        residual: *residuals.last().unwrap_or(&f64::NAN),
    })
}

/// Conjugacy class of `a_{t₁} u₁ m₁ v₁ a_{t₂} u₂ m₂ v₂`.
///
/// `u₁, u₂` are split as `n⁺ b n⁻`; the `n⁺` factors move left through the
/// flows, the `n⁻` factors right through `m₁, m₂`. The leftover perturbation
/// between the two blocks is split again and pushed through the long blocks,
/// leaving `a_T m u` for [`absorb_perturbation`].
#[allow(clippy::too_many_arguments)]
pub fn close_eight_word(
    t1: f64,
    u1: &GroupElement,
    m1: &Mat,
    v1: &GroupElement,
    t2: f64,
    u2: &GroupElement,
    m2: &Mat,
    v2: &GroupElement,
    cfg: &WordConfig,
    policy: &NumericPolicy,
) -> Result<Absorbed, WordError> {
    check_flow(t1, cfg)?;
    check_flow(t2, cfg)?;
    for g in [u1, v1, u2, v2] {
        check_small(g, cfg)?;
    }
    let n = u1.n();
    let id_m = Mat::identity(n - 1, n - 1);
    let f1 = nan_decompose(u1, policy)?;
    let f2 = nan_decompose(u2, policy)?;
    // a_{t1} n1⁺ = ň1⁺ a_{t1};  n1⁻ m1 = m1 ñ1⁻
    let n1p = exp_n(&conjugate_horospherical(t1, &id_m, &f1.chart.xplus, Sign::Plus), Sign::Plus);
    let n1m = exp_n(&conjugate_horospherical(0.0, m1, &f1.chart.xminus, Sign::Minus), Sign::Minus);
    let n2p = exp_n(&conjugate_horospherical(t2, &id_m, &f2.chart.xplus, Sign::Plus), Sign::Plus);
    let n2m = exp_n(&conjugate_horospherical(0.0, m2, &f2.chart.xminus, Sign::Minus), Sign::Minus);
    let u3 = &(&n1m * v1) * &n2p;
    let u4 = &(&n2m * v2) * &n1p;
    let big_t1 = t1 + f1.chart.t;
    let big_m1 = &f1.chart.m * m1;
    let big_t2 = t2 + f2.chart.t;
    let big_m2 = &f2.chart.m * m2;
    let f3 = nan_decompose(&u3, policy)?;
    let n3p = exp_n(&conjugate_horospherical(big_t1, &big_m1, &f3.chart.xplus, Sign::Plus), Sign::Plus);
    let n3m = exp_n(&conjugate_horospherical(big_t2, &big_m2, &f3.chart.xminus, Sign::Minus), Sign::Minus);
    let u5 = &(&n3m * &u4) * &n3p;
    let t5 = big_t1 + f3.chart.t + big_t2;
    let m5 = &(&big_m1 * &f3.chart.m) * &big_m2;
    absorb_unchecked(t5, m5, u5, policy)
}

/// `a_t m` as a group element.
pub fn normal_form(t: f64, m: &Mat) -> GroupElement {
    b_element(t, m)
}
