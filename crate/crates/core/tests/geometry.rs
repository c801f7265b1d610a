use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use pants_core::geometry::*;
use pants_core::lorentz::so::{haar_so, random_unit};
use pants_core::lorentz::{boost, flow, minkowski, rot2};
use pants_core::{GroupElement, HPoint, NumericPolicy};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_point(n: usize, rng: &mut ChaCha8Rng, r: f64) -> HPoint {
    let d = random_unit(n, rng);
    boost(&d, rng.random_range(0.0..r)).base_point()
}

fn e(n: usize, i: usize) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = 1.0;
    v
}

#[test]
fn distance_basics() {
    let p = HPoint::origin(3);
    assert_eq!(hdistance(&p, &p), 0.0);
    for t in [0.0, 1e-9, 0.3, 5.0, -7.0] {
        let q = flow(3, t).base_point();
        assert!((hdistance(&p, &q) - t.abs()).abs() < 1e-12 * t.abs().max(1.0));
    }
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        let a = random_point(4, &mut rng, 4.0);
        let b = random_point(4, &mut rng, 4.0);
        let c = random_point(4, &mut rng, 4.0);
        let (ab, bc, ac) = (hdistance(&a, &b), hdistance(&b, &c), hdistance(&a, &c));
        assert!(ac <= ab + bc + 1e-10);
        assert!((ab - hdistance(&b, &a)).abs() < 1e-12);
    }
}

/// Unit spacelike normal of the plane of a geodesic in H².
fn plane_normal(g: &Geodesic) -> DVector<f64> {
    let p = &g.base;
    let v = &g.dir;
    let c = DVector::from_vec(vec![
        p[1] * v[2] - p[2] * v[1],
        p[2] * v[0] - p[0] * v[2],
        p[0] * v[1] - p[1] * v[0],
    ]);
    let mut n = c;
    n[0] = -n[0];
    let q = minkowski(&n, &n);
    n / q.sqrt()
}

#[test]
fn planar_orthogeodesic_matches_normal_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut tested = 0;
    while tested < 200 {
        let g1 = Geodesic::from_frame(&(&boost(&random_unit(2, &mut rng), rng.random_range(0.0..2.0)) * &rot2(2, rng.random_range(-PI..PI))));
        let g2 = Geodesic::from_frame(&(&boost(&random_unit(2, &mut rng), rng.random_range(0.0..3.0)) * &rot2(2, rng.random_range(-PI..PI))));
        let c = minkowski(&plane_normal(&g1), &plane_normal(&g2)).abs();
        if c < 1.01 {
            continue;
        }
        tested += 1;
        let o = orthogeodesic(&g1, &g2).unwrap();
        assert!((o.length - c.acosh()).abs() < 1e-9, "{} vs {}", o.length, c.acosh());
        assert!(o.angle_defect() < 1e-8);
    }
}

#[test]
fn shifted_copy_has_constructed_feet() {
    let n = 4;
    let g1 = Geodesic::standard(n);
    let dir = e(n, 2);
    let shift = boost(&dir, 1.7);
    let g2 = g1.transformed(&(&shift * &flow(n, 0.4)));
    let o = orthogeodesic(&g1, &g2).unwrap();
    assert!((o.length - 1.7).abs() < 1e-10);
    assert!(o.src_param.abs() < 1e-10);
    let mut expect = DVector::zeros(n + 1);
    expect[3] = 1.0;
    assert!((&o.foot_src - &expect).norm() < 1e-9);
    let back = shift.mat() * -&expect;
    assert!((&o.foot_dst - back).norm() < 1e-9);
}

#[test]
fn orthogeodesic_errors() {
    let g = Geodesic::standard(3);
    assert_eq!(orthogeodesic(&g, &g).unwrap_err(), GeometryError::Identical);
    assert_eq!(orthogeodesic(&g, &g.reversed()).unwrap_err(), GeometryError::Identical);
    let shifted = g.transformed(&flow(3, 2.0));
    assert_eq!(orthogeodesic(&g, &shifted).unwrap_err(), GeometryError::Identical);
    // rotate about p₀: crosses the axis
    let crossing = g.transformed(&rot2(3, 0.7));
    assert!(matches!(orthogeodesic(&g, &crossing), Err(GeometryError::Intersecting { .. })));
    // parabolic image shares the forward endpoint
    let par = pants_core::lorentz::exp_n(&DVector::from_vec(vec![0.5, 0.2]), pants_core::lorentz::Sign::Plus);
    let asym = g.transformed(&par);
    let r = orthogeodesic(&g, &asym);
    assert!(matches!(r, Err(GeometryError::Asymptotic)), "{r:?}");
}

#[test]
fn orthogeodesic_symmetric_under_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n = 4;
        let h1 = &boost(&random_unit(n, &mut rng), rng.random_range(0.0..2.0)) * &pants_core::lorentz::rewrite(&haar_so(n, &mut rng), 1e-9).unwrap();
        let h2 = &boost(&random_unit(n, &mut rng), rng.random_range(0.5..3.0)) * &pants_core::lorentz::rewrite(&haar_so(n, &mut rng), 1e-9).unwrap();
        let (g1, g2) = (Geodesic::from_frame(&h1), Geodesic::from_frame(&h2));
        let a = orthogeodesic(&g1, &g2).unwrap();
        let b = orthogeodesic(&g2, &g1).unwrap();
        assert!((a.length - b.length).abs() < 1e-10);
        assert!((&a.foot_src - &b.foot_dst).norm() < 1e-8);
        assert!(a.angle_defect() < 1e-8);
        // no point pair does better
        for _ in 0..20 {
            let s = rng.random_range(-5.0..5.0);
            let t = rng.random_range(-5.0..5.0);
            assert!(hdistance(&g1.point(s), &g2.point(t)) >= a.length - 1e-10);
        }
    }
}

#[test]
fn transport_through_holonomy() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let lam = haar_so(3, &mut rng);
    let g = ModelClosedGeodesic::new(3.5, lam.clone()).unwrap();
    let w = random_unit(3, &mut rng);
    assert_eq!(parallel_transport(&g, 1.0, 1.0, &w), w);
    assert!((parallel_transport(&g, 0.0, 3.5, &w) - &lam * &w).norm() < 1e-12);
    let mut acc = DMatrix::identity(3, 3);
    for k in 1..=6 {
        acc = &acc * &lam;
        let got = parallel_transport(&g, 0.2, 0.2 + 3.5 * k as f64, &w);
        assert!((got - &acc * &w).norm() < k as f64 * 1e-11);
    }
}

proptest! {
    #[test]
    fn transport_composes(a in -20.0f64..20.0, b in -20.0f64..20.0, seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ModelClosedGeodesic::new(2.7, haar_so(3, &mut rng)).unwrap();
        let w = random_unit(3, &mut rng);
        let two = parallel_transport(&g, a, b, &parallel_transport(&g, 0.0, a, &w));
        let one = parallel_transport(&g, 0.0, b, &w);
        prop_assert!((two - one).norm() < 1e-11);
    }
}

#[test]
fn fiber_distance_conventions() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let flat = ModelClosedGeodesic::product(4, 6.0);
    let x = NormalFiberPoint { s: 1.0, w: random_unit(3, &mut rng) };
    assert_eq!(fiber_distance_along(&flat, &x, &x, D1_ARC), 0.0);
    let y = NormalFiberPoint { s: 4.0, w: random_unit(3, &mut rng) };
    let plain = pants_core::lorentz::sphere_distance(&x.w, &y.w);
    assert!((fiber_distance_along(&flat, &x, &y, Arc::First) - plain).abs() < 1e-14);
    assert!((fiber_distance_along(&flat, &x, &y, Arc::Second) - plain).abs() < 1e-14);
    let lam = haar_so(3, &mut rng);
    let g = ModelClosedGeodesic::new(6.0, lam.clone()).unwrap();
    let d2 = fiber_distance_along(&g, &x, &y, Arc::Second);
    let expect = pants_core::lorentz::sphere_distance(&(lam.transpose() * &x.w), &y.w);
    assert!((d2 - expect).abs() < 1e-12);
    let d1 = fiber_distance_along(&g, &x, &y, Arc::First);
    assert!((d1 - plain).abs() < 1e-12);
}

#[test]
fn deck_matches_identification() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let g = ModelClosedGeodesic::new(4.0, haar_so(3, &mut rng)).unwrap();
    let w = random_unit(3, &mut rng);
    let x = NormalFiberPoint { s: 0.5, w: w.clone() };
    let v = g.deck().mat() * g.normal_vector(&x);
    let back = g.from_normal_vector(4.5, &v);
    assert!((back.s - 0.5).abs() < 1e-12);
    assert!((back.w - w).norm() < 1e-12);
}

#[test]
fn fermat_equilateral_and_vertex() {
    let n = 2;
    let pts: Vec<HPoint> = (0..3)
        .map(|k| (&rot2(n, 2.0 * PI * k as f64 / 3.0) * &flow(n, 1.5)).base_point())
        .collect();
    let f = fermat_point(&pts[0], &pts[1], &pts[2]).unwrap();
    assert_eq!(f.kind, FermatKind::Interior);
    assert!(hdistance(&f.point, &HPoint::origin(n)) < 1e-10);
    for a in f.angles {
        assert!((a - 2.0 * PI / 3.0).abs() < 1e-6);
    }
    // obtuse vertex at A
    let a = HPoint::origin(n);
    let b = (&rot2(n, 0.0) * &flow(n, 1.0)).base_point();
    let c = (&rot2(n, 2.3) * &flow(n, 1.2)).base_point();
    let f = fermat_point(&a, &b, &c).unwrap();
    assert_eq!(f.kind, FermatKind::Vertex(0));
    assert!(matches!(
        fermat_point(&a, &b, &flow(n, 2.0).base_point()),
        Err(GeometryError::Degenerate(_))
    ));
}

#[test]
fn fermat_beats_grid_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..30 {
        let a = random_point(2, &mut rng, 2.0);
        let b = random_point(2, &mut rng, 2.0);
        let c = random_point(2, &mut rng, 2.0);
        let f = match fermat_point(&a, &b, &c) {
            Ok(f) => f,
            Err(_) => continue,
        };
        if f.kind == FermatKind::Interior {
            assert!(f.gradient_norm < 1e-8);
            for x in f.angles {
                assert!((x - 2.0 * PI / 3.0).abs() < 1e-6);
            }
        }
        let center = f.point.clone();
        let h = translation_to(&center);
        let mut best = f64::INFINITY;
        let steps = 120;
        for i in 0..=steps {
            for j in 0..=steps {
                let v = DVector::from_vec(vec![0.0, -1.0 + 2.0 * i as f64 / steps as f64, -1.0 + 2.0 * j as f64 / steps as f64]);
                let p = exp_at(&center, &(h.mat() * v));
                best = best.min(hdistance(&p, &a) + hdistance(&p, &b) + hdistance(&p, &c));
            }
        }
        assert!(f.objective <= best + 1e-5);
    }
}

#[test]
fn broken_reduce_cases() {
    let cfg = BrokenConfig::default();
    let r = broken_reduce(3, 8.0, 0.0, 8.0, &cfg).unwrap();
    assert!((r.t - 16.0).abs() < 1e-12);
    assert!(r.y1_distance < 1e-12 && r.y2_distance < 1e-9);
    let r = broken_reduce(3, 8.0, PI / 3.0, 8.0, &cfg).unwrap();
    assert!(r.defect > 0.0 && r.defect < 2.0 * std::f64::consts::LN_2 + 0.1);
    assert!(matches!(broken_reduce(3, 8.0, PI - 1e-5, 8.0, &cfg), Err(GeometryError::AngleTooSharp { .. })));
    assert!(matches!(broken_reduce(3, 1.0, 0.3, 8.0, &cfg), Err(GeometryError::ShortSegment { .. })));
}

#[test]
fn broken_reduce_law_of_cosines_and_reconstruction() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = BrokenConfig::default();
    for _ in 0..300 {
        let n = rng.random_range(2..6);
        let t1: f64 = rng.random_range(2.5..9.0);
        let t2: f64 = rng.random_range(2.5..9.0);
        let th: f64 = rng.random_range(-3.0..3.0);
        let r = broken_reduce(n, t1, th, t2, &cfg).unwrap();
        // interior angle is π − θ
        let cosh_t = t1.cosh() * t2.cosh() + t1.sinh() * t2.sinh() * th.cos();
        assert!((r.t - cosh_t.acosh()).abs() < 1e-9 * r.t.max(1.0));
        assert!(r.reconstruction_error < 1e-10, "{} {} {} {}", r.reconstruction_error, t1, th, t2);
        assert!(r.t < t1 + t2 + 1e-12);
    }
}

#[test]
fn closed_broken_defect_decays() {
    let cfg = BrokenConfig::default();
    let pol = NumericPolicy::F64;
    let a = closed_broken_length(2, 10.0, 10.0, &cfg, &pol).unwrap();
    assert!((a.length - a.planar_exact).abs() < 1e-9);
    // 2(e^{-10} + e^{-10}) leading term, generous constant
    assert!(a.defect < 8.0 * (-10f64).exp());
    let b = closed_broken_length(4, 12.0, 14.0, &cfg, &pol).unwrap();
    assert!(b.defect < a.defect);
    assert!(closed_broken_length(3, 1.0, 10.0, &cfg, &pol).is_err());
    let _ = GroupElement::identity(2);
}

#[test]
fn fermat_near_a_vertex_converges() {
    // obtuse triangles whose Fermat point sits close to a vertex
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut interior = 0;
    for _ in 0..2000 {
        let n = rng.random_range(2..5);
        let a = random_point(n, &mut rng, 3.0);
        let b = random_point(n, &mut rng, 3.0);
        let c = random_point(n, &mut rng, 3.0);
        match fermat_point(&a, &b, &c) {
            Ok(f) if f.kind == FermatKind::Interior => {
                interior += 1;
                assert!(f.angles.iter().all(|x| (x - 2.0 * PI / 3.0).abs() < 1e-6), "{:?}", f.angles);
            }
            Ok(_) => {}
            Err(e) => assert!(matches!(e, GeometryError::Degenerate(ref s) if s.contains("collinear")), "{e}"),
        }
    }
    assert!(interior > 1000);
}
