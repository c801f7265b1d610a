use pants_core::lorentz::so::{haar_so, random_lorentz_near_identity};
use pants_core::lorentz::{b_element, flow, m_element, rewrite, rot2};
use pants_core::word::*;
use pants_core::{GroupElement, Mat, NumericPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pol() -> NumericPolicy {
    NumericPolicy::F64
}

fn small(n: usize, scale: f64, rng: &mut ChaCha8Rng) -> GroupElement {
    GroupElement::from_matrix_unchecked(random_lorentz_near_identity(n, scale, rng))
}

#[test]
fn evaluate_basics() {
    let cfg = WordConfig::default();
    let id = evaluate(3, &[], &cfg, &pol()).unwrap();
    assert_eq!(id, GroupElement::identity(3));
    let g = evaluate(3, &[Instruction::FrameFlow { t: 1.2 }, Instruction::FrameFlow { t: 0.5 }], &cfg, &pol()).unwrap();
    assert!((g.mat() - flow(3, 1.7).mat()).abs().max() < 1e-13);
}

#[test]
fn word_times_inverse_word_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = WordConfig::default();
    for _ in 0..50 {
        let n = 4;
        let word: Vec<Instruction> = (0..12)
            .map(|i| match i % 4 {
                0 => Instruction::FrameFlow { t: rng.random_range(-2.0..2.0) },
                1 => Instruction::Rotation2 { theta: rng.random_range(-3.0..3.0) },
                2 => Instruction::Rewrite { k: haar_so(n, &mut rng) },
                _ => Instruction::Perturb { g: small(n, 0.03, &mut rng) },
            })
            .collect();
        let g = evaluate(n, &word, &cfg, &pol()).unwrap();
        let h = evaluate(n, &inverse_word(&word), &cfg, &pol()).unwrap();
        assert!(((&g * &h).mat() - Mat::identity(n + 1, n + 1)).abs().max() < 1e-11);
    }
    let big = small(4, 0.2, &mut rng);
    assert!(matches!(
        evaluate(4, &[Instruction::Perturb { g: big }], &cfg, &pol()),
        Err(WordError::PerturbTooLarge { .. })
    ));
}

#[test]
fn instructions_roundtrip_json() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let word = vec![
        Instruction::FrameFlow { t: 3.0 },
        Instruction::Rotation2 { theta: 0.5 },
        Instruction::Rewrite { k: haar_so(3, &mut rng) },
        Instruction::Perturb { g: small(3, 0.01, &mut rng) },
    ];
    let s = serde_json::to_string(&word).unwrap();
    assert!(s.contains("\"op\":\"frame_flow\""));
    let back: Vec<Instruction> = serde_json::from_str(&s).unwrap();
    let cfg = WordConfig::default();
    let a = evaluate(3, &word, &cfg, &pol()).unwrap();
    let b = evaluate(3, &back, &cfg, &pol()).unwrap();
    assert!((a.mat() - b.mat()).abs().max() < 1e-14);
}

#[test]
fn axis_of_normal_form_and_conjugates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..6 {
        for _ in 0..20 {
            let t = rng.random_range(0.1..12.0);
            let m = haar_so(n - 1, &mut rng);
            let g = b_element(t, &m);
            let inv = axis_invariants(&g, &pol()).unwrap();
            assert!((inv.t - t).abs() < 1e-10, "{} {}", inv.t, t);
            assert!(monodromy_distance(&inv.m_class, &m) < 1e-8);
            let h = &(&rewrite(&haar_so(n, &mut rng), 1e-9).unwrap() * &flow(n, rng.random_range(-2.0..2.0)))
                * &rewrite(&haar_so(n, &mut rng), 1e-9).unwrap();
            let c = &(&h * &g) * &h.inverse();
            let ic = axis_invariants(&c, &pol()).unwrap();
            assert!((ic.t - t).abs() < 1e-10);
            assert!(monodromy_distance(&ic.m_class, &m) < 1e-8);
        }
    }
}

#[test]
fn elliptic_and_parabolic_rejected() {
    let r = rot2(3, 0.7);
    assert!(matches!(axis_invariants(&r, &pol()), Err(WordError::NotLoxodromic { .. })));
    let p = pants_core::lorentz::exp_n(&nalgebra::DVector::from_vec(vec![0.3, 0.1]), pants_core::lorentz::Sign::Plus);
    assert!(matches!(axis_invariants(&p, &pol()), Err(WordError::NotLoxodromic { .. })));
}

#[test]
fn absorb_trivial_cases() {
    let cfg = WordConfig::default();
    let m = plane(3, 0.4);
    let a = absorb_perturbation(9.0, &m, &GroupElement::identity(4), &cfg, &pol()).unwrap();
    assert_eq!(a.t, 9.0);
    assert_eq!(a.m, m);
    let a = absorb_perturbation(9.0, &m, &flow(4, 0.01), &cfg, &pol()).unwrap();
    assert!((a.t - 9.01).abs() < 1e-14);
    assert!((&a.m - &m).abs().max() < 1e-14);
    assert!(matches!(
        absorb_perturbation(3.0, &m, &GroupElement::identity(4), &cfg, &pol()),
        Err(WordError::ShortFlow { .. })
    ));
}

fn plane(m: usize, th: f64) -> Mat {
    pants_core::lorentz::so::plane_rotation(m, 0, 1, th)
}

#[test]
fn absorb_matches_spectral_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = WordConfig::default();
    for _ in 0..500 {
        let n = rng.random_range(3..6);
        let t = rng.random_range(8.0..15.0);
        let m = haar_so(n - 1, &mut rng);
        let u = small(n, rng.random_range(0.0..0.01), &mut rng);
        let a = absorb_perturbation(t, &m, &u, &cfg, &pol()).unwrap();
        let g = &b_element(t, &m) * &u;
        let s = axis_invariants(&g, &pol()).unwrap();
        assert!((a.t - s.t).abs() < 1e-9, "t {} vs {}", a.t, s.t);
        let angles_a = rotation_angles(&a.m);
        let angles_s = rotation_angles(&s.m_class);
        for (x, y) in angles_a.iter().zip(&angles_s) {
            assert!((x - y).abs() < 1e-7, "{angles_a:?} {angles_s:?}");
        }
    }
}

fn rotation_angles(m: &Mat) -> Vec<f64> {
    pants_core::lorentz::linalg::rotation_angles(m)
}

#[test]
fn absorb_constant_is_bounded_and_decreasing_in_t() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = WordConfig::default();
    let ts = [8.5, 10.0, 12.0, 14.0];
    let mut worst = vec![0.0f64; ts.len()];
    for _ in 0..250 {
        let eps = 10f64.powf(rng.random_range(-4.0..-2.0));
        let m = haar_so(3, &mut rng);
        let u = small(4, eps, &mut rng);
        for (i, &t) in ts.iter().enumerate() {
            let a = absorb_perturbation(t, &m, &u, &cfg, &pol()).unwrap();
            worst[i] = worst[i].max((a.t - t).abs() / eps);
        }
    }
    for w in worst.windows(2) {
        assert!(w[1] <= w[0] * 1.05 + 1e-9, "{worst:?}");
    }
    assert!(worst[0] < 3.0, "{worst:?}");
}

fn eight(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> (f64, [GroupElement; 4], Mat, Mat, f64) {
    let t1 = rng.random_range(8.5..12.0);
    let t2 = rng.random_range(8.5..12.0);
    let gs = [small(n, scale, rng), small(n, scale, rng), small(n, scale, rng), small(n, scale, rng)];
    (t1, gs, haar_so(n - 1, rng), haar_so(n - 1, rng), t2)
}

#[test]
fn eight_word_matches_spectral() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = WordConfig::default();
    for _ in 0..100 {
        let n = rng.random_range(3..6);
        let (t1, [u1, v1, u2, v2], m1, m2, t2) = eight(&mut rng, n, 0.01);
        let r = close_eight_word(t1, &u1, &m1, &v1, t2, &u2, &m2, &v2, &cfg, &pol()).unwrap();
        let word = [
            flow(n, t1),
            u1.clone(),
            m_element(&m1, 1e-9).unwrap(),
            v1.clone(),
            flow(n, t2),
            u2.clone(),
            m_element(&m2, 1e-9).unwrap(),
            v2.clone(),
        ];
        let g = word.iter().skip(1).fold(word[0].clone(), |acc, x| &acc * x);
        let s = axis_invariants(&g, &pol()).unwrap();
        assert!((r.t - s.t).abs() < 1e-9, "{} {}", r.t, s.t);
        assert!((r.t - t1 - t2).abs() < 0.1);
        assert!(monodromy_distance(&r.m, &(&m1 * &m2)) < 0.1);
    }
}

#[test]
fn eight_word_trivial_and_scaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = WordConfig::default();
    let n = 4;
    let id = GroupElement::identity(n);
    let (m1, m2) = (haar_so(3, &mut rng), haar_so(3, &mut rng));
    let r = close_eight_word(9.0, &id, &m1, &id, 10.0, &id, &m2, &id, &cfg, &pol()).unwrap();
    assert!((r.t - 19.0).abs() < 1e-12);
    assert!((&r.m - &m1 * &m2).abs().max() < 1e-12);

    let base: Vec<Mat> = (0..4).map(|_| {
        let g = random_lorentz_near_identity(n, 1.0, &mut rng);
        pants_core::lorentz::linalg::logm(&g).unwrap()
    }).collect();
    let mut pts = Vec::new();
    for k in 0..6 {
        let lam = 1e-4 * 3f64.powi(k);
        let g: Vec<GroupElement> = base
            .iter()
            .map(|x| GroupElement::from_matrix_unchecked(pants_core::lorentz::linalg::expm(&(x * lam))))
            .collect();
        let r = close_eight_word(9.0, &g[0], &m1, &g[1], 10.0, &g[2], &m2, &g[3], &cfg, &pol()).unwrap();
        pts.push((lam.ln(), (r.t - 19.0).abs().ln()));
    }
    let slope = (pts[5].1 - pts[0].1) / (pts[5].0 - pts[0].0);
    assert!(slope >= 0.9, "{slope} {pts:?}");
}
