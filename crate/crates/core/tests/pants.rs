use std::f64::consts::PI;

use nalgebra::DVector;
use pants_core::geometry::{hdistance, orthogeodesic, Geodesic, ModelClosedGeodesic, NormalFiberPoint};
use pants_core::lorentz::linalg::so_norm_from_identity;
use pants_core::lorentz::so::{haar_so, half_turn, phi, random_rotation_near_identity};
use pants_core::lorentz::{so_distance, HPoint};
use pants_core::pants::*;
use pants_core::steiner::*;
use pants_core::word::{axis_invariants, monodromy_distance};
use pants_core::{Mat, NumericPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const POL: NumericPolicy = NumericPolicy::F64;

#[test]
fn perfect_cuffs_have_length_two_r() {
    for n in [2, 3, 4] {
        for r in [3.0, 8.0] {
            let p = build_perfect_pants(n, r).unwrap();
            let c = cuff_invariants(&p, &POL).unwrap();
            for cuff in &c.cuffs {
                assert!((cuff.length - 2.0 * r).abs() < 1e-9, "n={n} r={r} {}", cuff.length);
                assert!(cuff.monodromy_norm < 1e-9);
            }
        }
    }
}

#[test]
fn perfect_seams_match_hexagon() {
    let r = 4.0;
    let p = build_perfect_pants(3, r).unwrap();
    let ax = |i: usize| Geodesic::from_frame(&axis_invariants(&p.cuff_word(i), &POL).unwrap().axis.unwrap());
    let o = orthogeodesic(&ax(1), &ax(2)).unwrap();
    assert!((o.length - perfect_seam_length(r)).abs() < 1e-9, "{} vs {}", o.length, perfect_seam_length(r));
}

#[test]
fn perfect_steiner_graph() {
    let p = build_perfect_pants(3, 8.0).unwrap();
    let sg = steiner_minimize(&p, &SteinerConfig::default()).unwrap();
    println!("{sg:?}");
    let o = HPoint::origin(3);
    assert!(hdistance(&sg.x_point(), &o) < 1e-6);
    assert!(hdistance(&sg.y_point(), &o) < 1e-6);
    for a in sg.angles_x.iter().chain(&sg.angles_y) {
        assert!((a - 2.0 * PI / 3.0).abs() < 1e-6, "{a}");
    }
    assert!(sg.gradient_norm < 1e-8);
    assert!(sg.hessian_min_eig > 0.0);
    assert!(sg.seed_spread < 1e-7, "{}", sg.seed_spread);
}

#[test]
fn steiner_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = perturb_pants(&build_perfect_pants(4, 6.0).unwrap(), 0.02, 9);
    let sg = steiner_minimize(&p, &SteinerConfig::default()).unwrap();
    for _ in 0..3 {
        let h = pants_core::GroupElement::from_matrix_unchecked(pants_core::lorentz::so::random_lorentz_near_identity(4, 0.8, &mut rng));
        let q = p.conjugated(&h);
        let sq = steiner_minimize(&q, &SteinerConfig::default()).unwrap();
        assert!(hdistance(&sq.x_point(), &h.act(&sg.x_point())) < 1e-8);
        assert!(hdistance(&sq.y_point(), &h.act(&sg.y_point())) < 1e-8);
    }
}

#[test]
fn forced_degenerate_theta() {
    let n = 3;
    let l = 5.0;
    let d = |a: f64| DVector::from_vec(vec![a.cos(), a.sin(), 0.0]);
    let p = PantsPresentation {
        n,
        connections: [
            pants_core::GroupElement::identity(n),
            pants_core::lorentz::boost(&d(0.0), l),
            pants_core::lorentz::boost(&d(150f64.to_radians()), l),
        ],
        provenance: Provenance::External,
    };
    match steiner_minimize(&p, &SteinerConfig::default()) {
        Err(SteinerError::DegenerateTheta { edge, .. }) => assert_eq!(edge, 0),
        other => panic!("expected degenerate, got {other:?}"),
    }
}

#[test]
fn perfect_and_bad_classify() {
    let r = 8.0;
    let eps = 0.05;
    let cfg = ClassifyConfig::default();
    let good = classify(&build_perfect_pants(4, r).unwrap(), r, eps, &cfg).unwrap();
    match &good.verdict {
        Verdict::Good(c) => assert!(c.value < 1e-8, "{}", c.value),
        v => panic!("{v:?}"),
    }
    let badp = build_bad_pants(4, r).unwrap();
    let bad = classify(&badp, r, eps, &cfg).unwrap();
    match &bad.verdict {
        Verdict::Bad(c) => assert!(c.value < 1e-6, "{}", c.value),
        v => panic!("{v:?}"),
    }
    let b = axis_invariants(&bad_boundary_word(&badp), &POL).unwrap();
    assert!((b.t - 6.0 * r).abs() < (-r).exp() * 10.0, "{} vs {}", b.t, 6.0 * r);
}

#[test]
fn bad_pants_needs_three_dimensions() {
    assert!(matches!(build_bad_pants(2, 8.0), Err(PantsError::DimensionTooSmall { .. })));
}

#[test]
fn rescaled_cuff_is_not_cuff_good() {
    let r = 8.0;
    let eps = 0.05;
    let l = perfect_connection_length(r);
    let e = Mat::identity(2, 2);
    // the cuff opposite connection 0 shortens when ℓ₀ does not; find the shift
    let p = build_pants_from_connections(3, [l, l + 5.0 * eps, l + 5.0 * eps], [e.clone(), e.clone(), e], Provenance::Perturbed).unwrap();
    let c = classify(&p, r, eps, &ClassifyConfig::default()).unwrap();
    assert!(matches!(c.verdict, Verdict::NotCuffGood { .. }), "{:?}", c.cuffs);
}

#[test]
fn align_basics() {
    let a = align_to_involution(&Mat::identity(3, 3));
    assert!(a.dist == 0.0 && !a.bad);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let k = haar_so(2, &mut rng);
    let mut q = Mat::identity(3, 3);
    q.view_mut((1, 1), (2, 2)).copy_from(&k);
    let a = align_to_involution(&q);
    assert!((a.q.clone() - q.transpose()).abs().max() < 1e-12);
    assert!(a.dist < 1e-12);
    for _ in 0..1000 {
        let m = 3 + (rand::Rng::random_range(&mut rng, 0..3));
        let a = haar_so(m, &mut rng);
        let al = align_to_involution(&a);
        let d = so_distance(&(&a * &al.q), &al.u);
        assert!((d - al.dist).abs() < 1e-9);
        assert!(d <= 0.5 * so_distance(&a, &phi(&a)) + 1e-9);
    }
}

#[test]
fn classification_gauge_invariant() {
    let r = 8.0;
    let eps = 0.05;
    for (i, base) in [build_perfect_pants(4, r).unwrap(), build_bad_pants(4, r).unwrap()].iter().enumerate() {
        let p = perturb_pants(base, eps / 8.0, 40 + i as u64);
        let first = classify(&p, r, eps, &ClassifyConfig::default()).unwrap().verdict.label();
        for g in 0..20 {
            let cfg = ClassifyConfig {
                gauge_seed: Some(g),
                ..ClassifyConfig::default()
            };
            assert_eq!(classify(&p, r, eps, &cfg).unwrap().verdict.label(), first);
        }
    }
}

fn planar_third(n: usize, r: f64) -> ThirdConnection {
    let l = 2.0 * r;
    let mut fa = DVector::zeros(n - 1);
    fa[0] = 1.0;
    ThirdConnection {
        gamma0: ModelClosedGeodesic::product(n, l),
        foot_a: NormalFiberPoint { s: 0.0, w: fa.clone() },
        foot_b: NormalFiberPoint { s: r, w: fa },
        length: r + 2.0 * 2f64.ln(),
        y: Mat::identity(n - 1, n - 1),
    }
}

#[test]
fn symmetric_third_connection() {
    let tc = planar_third(4, 8.0);
    let d = third_connection_analysis(&tc, None).unwrap();
    for m in &d.predicted {
        assert!(so_norm_from_identity(m) < 1e-9);
    }
    for (i, c) in d.actual_cuffs().unwrap().iter().enumerate() {
        assert!((c.length - d.predicted_lengths[i]).abs() < 3.0 * (-8.0f64).exp());
        assert!(c.monodromy_norm < 1e-8);
    }
    for f in &average_feet(&tc, &d).unwrap() {
        assert!(f.drift < 1e-8, "{}", f.drift);
    }
}

fn random_third(n: usize, r: f64, eps: f64, seed: u64) -> ThirdConnection {
    use pants_core::lorentz::so::random_unit;
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lam = random_rotation_near_identity(n - 1, eps / 2.0, &mut rng);
    let l = 2.0 * r + rng.random_range(-eps..eps);
    let fa = random_unit(n - 1, &mut rng);
    let tilt = random_rotation_near_identity(n - 1, eps / 8.0, &mut rng);
    let fb = &tilt * &fa;
    let sa = rng.random_range(0.0..1.0);
    let u1 = r + rng.random_range(-eps..eps);
    let w = 2.0 * r + 2.0 * 2f64.ln() - u1 + rng.random_range(-eps..eps) * 0.5;
    ThirdConnection {
        gamma0: ModelClosedGeodesic::new(l, lam).unwrap(),
        foot_a: NormalFiberPoint { s: sa, w: fa },
        foot_b: NormalFiberPoint { s: sa + u1, w: fb },
        length: w,
        y: random_rotation_near_identity(n - 1, eps / 2.0, &mut rng),
    }
}


#[test]
fn third_connection_predictions_match_words() {
    for r in [6.0, 8.0, 10.0] {
        for seed in 0..20 {
            let tc = random_third(4, r, 0.05, seed);
            let d = third_connection_analysis(&tc, None).unwrap();
            let tol = (-r / 2.0f64).exp();
            for (i, c) in d.actual_cuffs().unwrap().iter().enumerate() {
                assert!((c.length - d.predicted_lengths[i]).abs() < tol, "R={r} cuff {i}");
                assert!(monodromy_distance(&c.monodromy, &d.predicted[i]) < tol, "R={r} cuff {i}");
            }
        }
    }
}

#[test]
fn close_feet_give_close_arc_monodromies() {
    let eps = 0.05;
    for seed in 0..200 {
        let tc = random_third(5, 8.0, eps, 1000 + seed);
        let d = third_connection_analysis(&tc, None).unwrap();
        assert!(d.feet_gap < eps / 4.0);
        assert!(so_norm_from_identity(&d.predicted[0]) < eps);
        let dx = so_distance(&d.x1, &d.x2);
        assert!(dx < eps + 2.0 * d.feet_gap, "{dx} vs {}", eps + 2.0 * d.feet_gap);
    }
}

#[test]
fn arc_monodromy_distance_is_gauge_free() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let tc = random_third(5, 8.0, 0.05, 77);
    let base = third_connection_analysis(&tc, None).unwrap();
    let d0 = so_distance(&base.x1, &base.x2);
    for _ in 0..10 {
        let ge = haar_so(3, &mut rng);
        let gf = haar_so(3, &mut rng);
        let d = third_connection_analysis(&tc, Some((&ge, &gf))).unwrap();
        assert!((so_distance(&d.x1, &d.x2) - d0).abs() < 1e-9);
        // the other two predictions involve Y, which is tied to one gauge
        assert!(monodromy_distance(&d.predicted[0], &base.predicted[0]) < 1e-9);
    }
}

#[test]
fn average_feet_drift_decays_like_exp_minus_r() {
    let rs = [6.0, 8.0, 10.0];
    let mut logs = Vec::new();
    for &r in &rs {
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let tc = random_third(4, r, 0.05, seed);
            let d = third_connection_analysis(&tc, None).unwrap();
            for f in &average_feet(&tc, &d).unwrap() {
                worst = worst.max(f.drift);
            }
        }
        assert!(worst < (-r).exp());
        logs.push(worst.ln());
    }
    let slope = (logs[2] - logs[0]) / (rs[2] - rs[0]);
    assert!((slope + 1.0).abs() < 0.15, "slope {slope}");
}

#[test]
fn perpendicular_feet_from_far_geodesic_are_close() {
    use pants_core::geometry::perpendicular_foot;
    use pants_core::lorentz::{boost, rot2};
    for d in [3.0, 5.0, 7.0] {
        let g1 = Geodesic::standard(3);
        // a geodesic at distance d, twisted out of the plane
        let h = &(&boost(&DVector::from_vec(vec![0.0, 1.0, 0.0]), d) * &rot2(3, 0.7)) * &pants_core::lorentz::boost(&DVector::from_vec(vec![0.0, 0.0, 1.0]), 0.0);
        let g2 = g1.transformed(&h);
        let o = orthogeodesic(&g1, &g2).unwrap();
        let mut worst: f64 = 0.0;
        for k in 0..40 {
            let x = g2.point(o.dst_param + k as f64 * 0.5 - 10.0);
            let f = perpendicular_foot(&g1, &x);
            let df = (f.s - o.src_param).abs() + pants_core::lorentz::sphere_distance(&f.normal, &o.foot_src);
            worst = worst.max(df);
        }
        assert!(worst < 4.0 * (-(o.length)).exp(), "d={} worst {worst}", o.length);
    }
}

#[test]
fn cuff_monodromy_from_connection_monodromies() {
    let r = 8.0;
    for (k, base) in [build_perfect_pants(4, r).unwrap(), build_bad_pants(4, r).unwrap()].iter().enumerate() {
        for seed in 0..5 {
            let p = perturb_pants(base, 0.01, 10 * k as u64 + seed);
            let sg = steiner_minimize(&p, &SteinerConfig::default()).unwrap();
            let tri = tripods_from_steiner(&p, &sg, None).unwrap();
            let x = connection_monodromies(&p, &sg, &tri).x;
            let cuffs = cuff_invariants(&p, &POL).unwrap();
            for i in 0..3 {
                let est = x[(i + 2) % 3].transpose() * phi(&x[(i + 1) % 3]);
                let dist = monodromy_distance(&est, &cuffs.cuffs[i].monodromy)
                    .min(monodromy_distance(&est.transpose(), &cuffs.cuffs[i].monodromy));
                assert!(dist < (-r / 2.0f64).exp(), "cuff {i}: {dist}");
            }
        }
    }
}

#[test]
fn perturbation_behaviour() {
    let p = build_perfect_pants(4, 8.0).unwrap();
    let q = perturb_pants(&p, 0.0, 1);
    for i in 0..3 {
        assert_eq!(q.connections[i].mat(), p.connections[i].mat());
    }
    let a = perturb_pants(&p, 0.01, 7);
    let b = perturb_pants(&p, 0.01, 7);
    assert_eq!(a.connections[0].mat(), b.connections[0].mat());
    // cuff lengths move linearly with the scale
    let mut moves = Vec::new();
    for scale in [1e-4, 1e-3, 1e-2] {
        let mut worst: f64 = 0.0;
        for seed in 0..10 {
            let c = cuff_invariants(&perturb_pants(&p, scale, seed), &POL).unwrap();
            for cuff in &c.cuffs {
                worst = worst.max((cuff.length - 16.0).abs());
            }
        }
        assert!(worst < 10.0 * scale);
        moves.push(worst);
    }
    assert!(moves[2] / moves[0] > 10.0);
    // stability of the verdict for tiny perturbations
    let eps = 0.05;
    for (base, label) in [(p.clone(), "good"), (build_bad_pants(4, 8.0).unwrap(), "bad")] {
        for seed in 0..10 {
            let c = classify(&perturb_pants(&base, 0.01 * eps, seed), 8.0, eps, &ClassifyConfig::default()).unwrap();
            assert_eq!(c.verdict.label(), label);
        }
    }
}

#[test]
fn bad_pants_are_cuff_good_with_half_turn_monodromies() {
    let p = build_bad_pants(5, 8.0).unwrap();
    let c = cuff_invariants(&p, &POL).unwrap();
    assert!(c.all_good(8.0, 0.05));
    let sg = steiner_minimize(&p, &SteinerConfig::default()).unwrap();
    let tri = tripods_from_steiner(&p, &sg, None).unwrap();
    let x = connection_monodromies(&p, &sg, &tri);
    let al = align_to_involution(&x.x[0]);
    for xi in &x.x {
        assert!(so_distance(&(xi * &al.q), &half_turn(4)) < 1e-6);
    }
}

#[test]
fn convexity_probe_on_perfect_pants() {
    let p = build_perfect_pants(3, 8.0).unwrap();
    let o = HPoint::origin(3);
    let rep = convexity_probe(&p, (&o, &o), 1.0, 200, 11);
    assert_eq!(rep.strict, 200);
    assert!(rep.min_margin > 0.0);
    // a zero-length segment has zero margin
    let zero = convexity_probe(&p, (&o, &o), 0.0, 5, 11);
    assert!(zero.margins.iter().all(|m| m.abs() < 1e-12));
    // margins shrink quadratically with the segment length
    let scales = [0.2, 0.1, 0.05, 0.025];
    let means: Vec<f64> = scales
        .iter()
        .map(|&h| {
            let r = convexity_probe(&p, (&o, &o), h, 50, 3);
            r.margins.iter().sum::<f64>() / r.margins.len() as f64
        })
        .collect();
    let xs: Vec<f64> = scales.iter().map(|h: &f64| h.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!((1.8..=2.2).contains(&slope), "exponent {slope}");
}

#[test]
fn tripods_of_perfect_pants() {
    use pants_core::lorentz::minkowski;
    let p = build_perfect_pants(4, 8.0).unwrap();
    let sg = steiner_minimize(&p, &SteinerConfig::default()).unwrap();
    let tri = tripods_from_steiner(&p, &sg, None).unwrap();
    for v in tri.at_x.iter().chain(&tri.at_y) {
        // Fuchsian plane is spanned by e₀, e₁, e₂
        assert!(v[3].abs() < 1e-6 && v[4].abs() < 1e-6);
    }
    for (frame, at) in [(&tri.frame_e, &tri.at_x), (&tri.frame_f, &tri.at_y)] {
        let m = frame.mat();
        assert!(frame.lorentz_defect() < 1e-10);
        let perp = m.column(2).into_owned();
        let want = if std::ptr::eq(at, &tri.at_x) { &at[1] } else { &at[2] };
        let angle = minkowski(&perp, want).clamp(-1.0, 1.0).acos();
        assert!((angle - PI / 6.0).abs() < 1e-6, "{angle}");
        for j in 3..5 {
            for v in at.iter() {
                assert!(minkowski(&m.column(j).into_owned(), v).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn centered_presentation_keeps_cuff_data() {
    use pants_core::foot::{sample_good_region, GoodRegionSpec};
    use pants_core::lorentz::so::plane_rotation;
    let g = ModelClosedGeodesic::new(20.0, plane_rotation(3, 0, 1, 0.03)).unwrap();
    let spec = GoodRegionSpec::new(10.0, 0.1, 0.1, g).unwrap();
    for p in &sample_good_region(&spec, 4, 5).unwrap().points {
        let data = third_connection_analysis(&spec.third_connection(p), None).unwrap();
        let direct = data.actual_cuffs().unwrap();
        let via = cuff_invariants(&data.presentation_centered(), &POL).unwrap();
        // presentation cuffs run T⁻¹S⁻¹, S, T; axes up to L/4 from p₀ cost
        // about e^{L/2}·1e−16·e^{2R} in the monodromy
        for (a, b) in via.cuffs.iter().zip(direct.iter().rev()) {
            assert!((a.length - b.length).abs() < 1e-7, "{} {}", a.length, b.length);
            assert!((a.monodromy_norm - b.monodromy_norm).abs() < 1e-3, "{} {}", a.monodromy_norm, b.monodromy_norm);
        }
    }
}
