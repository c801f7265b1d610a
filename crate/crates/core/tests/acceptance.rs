//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! A failing criterion makes the process exit with status 1, except for the
//! parts listed as infeasible at desk scale; those still print FAIL with their
//! diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use pants_core::foot::*;
use pants_core::geometry::{fermat_point, hdistance, FermatKind, ModelClosedGeodesic, NormalFiberPoint};
use pants_core::lorentz::so::{haar_so, plane_rotation, random_lorentz_near_identity, random_rotation_near_identity, random_unit};
use pants_core::lorentz::{b_element, boost, flow, m_element, nan_by_elimination, nan_decompose, nan_decompose_from, so_distance, NanChart};
use pants_core::matching::*;
use pants_core::pants::*;
use pants_core::steiner::{convexity_probe, steiner_minimize, SteinerConfig, SteinerError};
use pants_core::word::{absorb_perturbation, axis_invariants, close_eight_word, WordConfig};
use pants_core::{GroupElement, HPoint, NumericPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const POL: NumericPolicy = NumericPolicy::F64;

struct Line {
    pass: bool,
    detail: String,
    /// Printed FAIL without failing the run.
    infeasible: bool,
}

impl Line {
    fn new(pass: bool, detail: String) -> Self {
        Line { pass, detail, infeasible: false }
    }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn small(n: usize, scale: f64, r: &mut ChaCha8Rng) -> GroupElement {
    GroupElement::from_matrix_unchecked(random_lorentz_near_identity(n, scale, r))
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    num / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>()
}

fn c1_nan() -> Line {
    let mut r = rng(101);
    let (mut resid, mut uniq, mut fails) = (0.0f64, 0.0f64, 0);
    for _ in 0..1000 {
        let n = r.random_range(2..=8);
        let u = small(n, r.random_range(0.0..0.05), &mut r);
        let Ok(f) = nan_decompose(&u, &POL) else {
            fails += 1;
            continue;
        };
        let back = &(&f.nplus * &f.b) * &f.nminus;
        resid = resid.max((back.mat() - u.mat()).abs().max());
        // elimination in the light-cone basis, and Newton from a shifted start
        match nan_by_elimination(&u) {
            Some((np, b, nm)) => {
                let d = [(np, &f.nplus), (b, &f.b), (nm, &f.nminus)].iter().map(|(a, c)| (a.mat() - c.mat()).abs().max()).fold(0.0, f64::max);
                uniq = uniq.max(d);
            }
            None => fails += 1,
        }
        let mut start = NanChart::zero(n);
        start.t = 0.01;
        start.xplus.iter_mut().for_each(|x| *x = 0.01);
        match nan_decompose_from(&u, start, &POL) {
            Ok(g) => uniq = uniq.max((g.b.mat() - f.b.mat()).abs().max()).max((g.nplus.mat() - f.nplus.mat()).abs().max()),
            Err(_) => fails += 1,
        }
    }
    Line::new(fails == 0 && resid < 1e-10 && uniq < 1e-8, format!("1000 cases, max residual {resid:.1e}, uniqueness {uniq:.1e}, failures {fails}"))
}

fn c2_words() -> Line {
    let mut r = rng(102);
    let cfg = WordConfig::default();
    let (mut len_err, mut k_t, mut k_m, mut fails) = (0.0f64, 0.0f64, 0.0f64, 0);
    for i in 0..500 {
        let n = r.random_range(3..6);
        let eps = 10f64.powf(r.random_range(-4.0..-2.0));
        if i % 2 == 0 {
            let t = r.random_range(8.0..15.0);
            let m = haar_so(n - 1, &mut r);
            let u = small(n, eps, &mut r);
            let (Ok(a), Ok(s)) = (absorb_perturbation(t, &m, &u, &cfg, &POL), axis_invariants(&(&b_element(t, &m) * &u), &POL)) else {
                fails += 1;
                continue;
            };
            len_err = len_err.max((a.t - s.t).abs());
            k_t = k_t.max((a.t - t).abs() / eps);
            k_m = k_m.max(so_distance(&a.m, &m) / eps);
        } else {
            let t1 = r.random_range(8.0..15.0);
            let t2 = r.random_range(8.0..15.0);
            let gs: Vec<GroupElement> = (0..4).map(|_| small(n, eps, &mut r)).collect();
            let (m1, m2) = (haar_so(n - 1, &mut r), haar_so(n - 1, &mut r));
            let Ok(a) = close_eight_word(t1, &gs[0], &m1, &gs[1], t2, &gs[2], &m2, &gs[3], &cfg, &POL) else {
                fails += 1;
                continue;
            };
            let word = [flow(n, t1), gs[0].clone(), m_element(&m1, 1e-9).unwrap(), gs[1].clone(), flow(n, t2), gs[2].clone(), m_element(&m2, 1e-9).unwrap(), gs[3].clone()];
            let g = word.iter().skip(1).fold(word[0].clone(), |acc, x| &acc * x);
            let Ok(s) = axis_invariants(&g, &POL) else {
                fails += 1;
                continue;
            };
            len_err = len_err.max((a.t - s.t).abs());
            k_t = k_t.max((a.t - t1 - t2).abs() / eps);
            k_m = k_m.max(so_distance(&a.m, &(&m1 * &m2)) / eps);
        }
    }
    Line::new(
        fails == 0 && len_err < 1e-9 && k_t < 10.0 && k_m < 10.0,
        format!("500 cases, length vs spectral {len_err:.1e}, K = {k_t:.2}, d(m, m1m2)/eps <= {k_m:.2}, failures {fails}"),
    )
}

/// Triangle angle at `a` from the hyperbolic law of cosines.
fn angle_at(a: &HPoint, b: &HPoint, c: &HPoint) -> f64 {
    let (x, y, z) = (hdistance(a, b), hdistance(a, c), hdistance(b, c));
    ((x.cosh() * y.cosh() - z.cosh()) / (x.sinh() * y.sinh())).clamp(-1.0, 1.0).acos()
}

fn c3_steiner() -> Line {
    let mut r = rng(103);
    let mut bad = Vec::new();
    let tri = |n: usize| {
        let pts: Vec<HPoint> = (0..3).map(|k| (&pants_core::lorentz::rot2(n, 2.0 * PI * k as f64 / 3.0) * &flow(n, 1.5)).base_point()).collect();
        pts
    };
    let eq = tri(2);
    let mut triangles = vec![eq];
    for _ in 0..200 {
        let n = r.random_range(2..5);
        let pts: Vec<HPoint> = (0..3)
            .map(|_| {
                let d = random_unit(n, &mut r);
                boost(&d, r.random_range(0.2..3.0)).base_point()
            })
            .collect();
        triangles.push(pts);
    }
    let (mut interior, mut vertex) = (0, 0);
    for (i, t) in triangles.iter().enumerate() {
        let f = match fermat_point(&t[0], &t[1], &t[2]) {
            Ok(f) => f,
            Err(e) => {
                bad.push(format!("triangle {i}: {e}"));
                continue;
            }
        };
        let angles = [angle_at(&t[0], &t[1], &t[2]), angle_at(&t[1], &t[2], &t[0]), angle_at(&t[2], &t[0], &t[1])];
        let wide = angles.iter().position(|&a| a >= 2.0 * PI / 3.0);
        match (f.kind, wide) {
            (FermatKind::Interior, None) => {
                interior += 1;
                if f.angles.iter().any(|a| (a - 2.0 * PI / 3.0).abs() > 1e-6) {
                    bad.push(format!("triangle {i}: angles {:?}", f.angles));
                }
            }
            (FermatKind::Vertex(k), Some(w)) if k == w => vertex += 1,
            (k, w) => bad.push(format!("triangle {i}: {k:?} but wide vertex {w:?}")),
        }
    }
    let mut strict = (0, 0);
    let mut steiner = Vec::new();
    for rr in [6.0, 8.0, 10.0] {
        let p = build_perfect_pants(3, rr).unwrap();
        let o = HPoint::origin(3);
        let rep = convexity_probe(&p, (&o, &o), 1.0, 100, 11);
        strict.0 += rep.strict;
        strict.1 += rep.trials;
        match steiner_minimize(&p, &SteinerConfig::default()) {
            Ok(sg) => {
                let dev = sg.angles_x.iter().chain(&sg.angles_y).map(|a| (a - 2.0 * PI / 3.0).abs()).fold(0.0, f64::max);
                if dev > 1e-6 {
                    bad.push(format!("R={rr}: angle deviation {dev:.1e}"));
                }
                steiner.push(format!("R={rr} dev {dev:.0e}"));
            }
            Err(SteinerError::DegenerateTheta { .. }) => bad.push(format!("R={rr}: degenerate")),
            Err(e) => bad.push(format!("R={rr}: {e}")),
        }
    }
    if strict.0 != strict.1 {
        bad.push(format!("convexity {}/{}", strict.0, strict.1));
    }
    Line::new(
        bad.is_empty(),
        format!(
            "201 triangles ({interior} interior, {vertex} vertex), convexity {}/{} strict, perfect pants {}{}",
            strict.0,
            strict.1,
            steiner.join(", "),
            if bad.is_empty() { String::new() } else { format!("; problems: {}", bad.join("; ")) }
        ),
    )
}

fn c4_dichotomy() -> Line {
    let (n, r, eps) = (4, 8.0, 0.05);
    let bases = [("good", build_perfect_pants(n, r).unwrap()), ("bad", build_bad_pants(n, r).unwrap())];
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut gauge_breaks = 0;
    for (k, (want, base)) in bases.iter().enumerate() {
        for i in 0..500u64 {
            let p = perturb_pants(base, eps / 4.0, 10_000 * k as u64 + i);
            let label = classify(&p, r, eps, &ClassifyConfig::default()).map(|c| c.verdict.label()).unwrap_or("error");
            *counts.entry(format!("{want}->{label}")).or_default() += 1;
            for g in 0..20 {
                let cfg = ClassifyConfig { gauge_seed: Some(g), ..ClassifyConfig::default() };
                let l = classify(&p, r, eps, &cfg).map(|c| c.verdict.label()).unwrap_or("error");
                if l != label {
                    gauge_breaks += 1;
                }
            }
        }
    }
    let pass = counts.get("good->good") == Some(&500) && counts.get("bad->bad") == Some(&500) && gauge_breaks == 0;
    Line::new(pass, format!("{counts:?}, gauge disagreements {gauge_breaks} over 20 reframings each"))
}

fn c5_diamonds() -> Line {
    let mut worst = 0.0f64;
    for (hat, eps, r, l0) in [(false, 0.05, 6.0, 12.1), (true, 0.05, 6.0, 12.1), (false, 0.1, 8.0, 16.2), (true, 0.1, 8.0, 15.9)] {
        let exact = if hat { hat_diamond_area(r, eps, l0) } else { diamond_area(r, eps, l0) };
        let mc = diamond_area_mc(r, eps, l0, hat, 1_000_000, 23);
        worst = worst.max((mc.value - exact).abs() / mc.stderr);
    }
    let (r, l0, e) = (8.0f64, 16.3, 1e-4);
    let lim = (diamond_area(r, e, l0) / (e * e) / (128.0 * (4.0 * r - l0).exp()) - 1.0).abs();
    Line::new(worst < 3.0 && lim < 1e-3, format!("worst MC deviation {worst:.2} stderr, small-eps ratio error {lim:.1e}"))
}

fn c6_ball_volumes() -> Line {
    let mut r = rng(106);
    let (mut exact_dev, mut lower_out, mut upper_viol, mut points) = (0.0f64, 0, 0, 0);
    let mut low_range = (f64::INFINITY, 0.0f64);
    for m in [2usize, 3, 4] {
        let k = so_dim(m) as i32;
        for rad in [0.05, 0.1, 0.2, 0.3, 0.5] {
            for frac in [0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.3, 1.6, 1.8, 1.95] {
                let d = frac * rad;
                let x = so_at_distance(m, d, &mut r);
                let est = ball_intersection_volume(&x, rad, 100_000, 1000 + points as u64);
                points += 1;
                if m == 2 {
                    exact_dev = exact_dev.max((est.value - (2.0 * rad - d)).abs() / est.stderr.max(1e-300));
                }
                if est.value > near_tangent_bound(m, d, rad) {
                    upper_viol += 1;
                }
                if frac <= 1.0 {
                    // B_{r−d/2} about the midpoint lies in the intersection
                    let ratio = est.value / (unit_ball_volume(k as usize) * rad.powi(k));
                    low_range = (low_range.0.min(ratio), low_range.1.max(ratio));
                    if ratio < 0.8 * 0.5f64.powi(k) || ratio > 1.0 + 3.0 * est.stderr / est.value {
                        lower_out += 1;
                    }
                }
            }
        }
    }
    Line::new(
        exact_dev < 3.0 && lower_out == 0 && upper_viol == 0,
        format!(
            "{points} points, SO(2) exact deviation {exact_dev:.2} stderr, V/(w_k r^k) in [{:.3}, {:.3}] below tangency, {upper_viol} near-tangent violations",
            low_range.0, low_range.1
        ),
    )
}

fn density_spec(r: f64, eps: f64) -> GoodRegionSpec {
    let g = ModelClosedGeodesic::new(2.0 * r, plane_rotation(3, 0, 1, eps / 2.0)).unwrap();
    GoodRegionSpec::new(r, eps, eps, g).unwrap()
}

fn c7_quasi_uniform() -> (Line, DensityEstimate) {
    let spec = density_spec(10.0, 0.1);
    let cfg = FiberConfig::default();
    let coarse = estimated_measure(&spec, &FootGrid { s_bins: 1, sphere_cells: 32 }, &cfg);
    let fine = estimated_measure(&spec, &FootGrid { s_bins: 1, sphere_cells: 64 }, &cfg);
    let stable = (fine.ratio / coarse.ratio - 1.0).abs();
    let v = NormalFiberPoint { s: 0.0, w: DVector::from_vec(vec![0.0, 0.0, 1.0]) };
    let epss = [0.0125, 0.025, 0.05, 0.1];
    let logs: Vec<f64> = epss
        .iter()
        .map(|&e| fiber_density(&density_spec(10.0, e), &v, &FiberConfig { samples: 40_000, ..cfg }).density.ln())
        .collect();
    let xs: Vec<f64> = epss.iter().map(|e| e.ln()).collect();
    let expo = slope(&xs, &logs);
    let pass = coarse.ratio.is_finite() && stable <= 0.1 && (expo - 7.0).abs() <= 0.2;
    let line = Line::new(
        pass,
        format!(
            "max/min {:.3} (32 cells), {:.3} (64 cells), change {:.1}%, eps exponent {expo:.3}, tau residual {:.1}, B0 {:.3e}",
            coarse.ratio,
            fine.ratio,
            100.0 * stable,
            coarse.tau_residual,
            coarse.b0
        ),
    );
    (line, coarse)
}

fn random_third(n: usize, r: f64, eps: f64, seed: u64) -> ThirdConnection {
    let mut g = rng(seed);
    let lam = random_rotation_near_identity(n - 1, eps / 2.0, &mut g);
    let l = 2.0 * r + g.random_range(-eps..eps);
    let fa = random_unit(n - 1, &mut g);
    let fb = &random_rotation_near_identity(n - 1, eps / 8.0, &mut g) * &fa;
    let sa = g.random_range(0.0..1.0);
    let u1 = r + g.random_range(-eps..eps);
    let w = 2.0 * r + 2.0 * 2f64.ln() - u1 + g.random_range(-eps..eps) * 0.5;
    ThirdConnection {
        gamma0: ModelClosedGeodesic::new(l, lam).unwrap(),
        foot_a: NormalFiberPoint { s: sa, w: fa },
        foot_b: NormalFiberPoint { s: sa + u1, w: fb },
        length: w,
        y: random_rotation_near_identity(n - 1, eps / 2.0, &mut g),
    }
}

fn c8_drift() -> Line {
    let rs = [6.0, 8.0, 10.0];
    let mut logs = Vec::new();
    for &r in &rs {
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let tc = random_third(4, r, 0.05, 800 + seed);
            let d = third_connection_analysis(&tc, None).unwrap();
            for f in &average_feet(&tc, &d).unwrap() {
                worst = worst.max(f.drift);
            }
        }
        logs.push(worst.ln());
    }
    let s = slope(&rs, &logs);
    Line::new((-1.15..=-0.85).contains(&s), format!("slope {s:.3}, drift at R=10 {:.2e}", logs[2].exp()))
}

fn obstruction(g: &ModelClosedGeodesic, mode: &AtlasMode, n: usize, xi: f64, seed: u64) -> Result<String, String> {
    let atlas = synthesize_atlas(g, mode, n, seed).map_err(|e| e.to_string())?;
    match find_matching(&atlas, xi) {
        MatchingResult::HallViolation { certificate, matched } => {
            let (def, _) = exact_hall(&atlas, xi);
            let pre = recount_preimages(&atlas, xi, &certificate.targets);
            // majority targets only have minority preimages, so 3:1 leaves at least half unmatched
            if verify_certificate(&atlas, xi, &certificate) && def == certificate.deficiency && def >= n / 2 && pre < certificate.targets.len() {
                Ok(format!("|T| {} vs {} preimages, deficiency {def}, matched {matched}/{n}", certificate.targets.len(), pre))
            } else {
                Err(format!("certificate |T| {} vs {pre}, exact deficiency {def}", certificate.targets.len()))
            }
        }
        MatchingResult::Perfect { .. } => Err("unexpected perfect matching".into()),
    }
}

fn c9_matching(density: &DensityEstimate) -> Vec<(String, Line)> {
    let r = 10.0;
    let xi = 1.0 / (r * r);
    let g = ModelClosedGeodesic::new(2.0 * r, plane_rotation(3, 0, 1, 0.05)).unwrap();
    let mut perfect = 0;
    let (mut stars, mut edges) = (Vec::new(), 0usize);
    for seed in 0..20 {
        let atlas = synthesize_atlas(&g, &AtlasMode::QuasiUniform(density.clone()), 200, seed).unwrap();
        edges = edges.max(TauGraph::build(&atlas, xi).edge_count());
        if let MatchingResult::Perfect { sigma, max_displacement } = find_matching(&atlas, xi) {
            if max_displacement < xi && verify_sigma(&atlas, xi, &sigma) {
                perfect += 1;
            }
        }
        stars.push(bottleneck_xi(&atlas));
    }
    stars.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let uniform = Line {
        pass: perfect >= 19,
        detail: format!(
            "{perfect}/20 perfect at xi = {xi}; bottleneck xi* median {:.3}, range [{:.3}, {:.3}]; at most {edges} tau-edges per atlas; xi* ~ N^(-1/3) reaches xi near N = {:.1e}",
            stars[10],
            stars[0],
            stars[19],
            200.0 * (stars[10] / xi).powi(3)
        ),
        infeasible: true,
    };
    let prod = ModelClosedGeodesic::product(4, 2.0 * r);
    let ice = obstruction(&prod, &AtlasMode::IceCap { imbalance: (3, 1), radius: 0.1 }, 200, 0.5, 1);
    let band = obstruction(&prod, &AtlasMode::Bands { colatitude: PI / 4.0, half_width: 0.05, imbalance: (3, 1) }, 200, 0.5, 2);
    let as_line = |r: Result<String, String>| match r {
        Ok(s) => Line::new(true, s),
        Err(s) => Line::new(false, s),
    };
    vec![("quasi-uniform".into(), uniform), ("ice cap 3:1".into(), as_line(ice)), ("bands 3:1".into(), as_line(band))]
}

fn c10_cheeger() -> Line {
    let r = 10.0;
    match cheeger_bundle_bound(&ModelClosedGeodesic::product(4, 16.0), r, &CheegerMesh::default(), 100, 0.3) {
        Ok(rep) => Line::new(
            rep.estimate >= 1.0 / (4.0 * r) && rep.growth.tested == 100 && rep.growth.violations == 0,
            format!(
                "estimate {:.4} (refined {:.4}) vs 1/40, growth {}/{} sets hold, min ratio {:.3}",
                rep.estimate,
                rep.refined_estimate,
                rep.growth.tested - rep.growth.violations,
                rep.growth.tested,
                rep.growth.min_ratio
            ),
        ),
        Err(e) => Line::new(false, e.to_string()),
    }
}

fn c11_assembly() -> Line {
    let cuffs = [0, 1, 2].map(|c| CuffRef { curve: c, entry: 0 });
    let single: BTreeMap<u64, Vec<usize>> = (0..3).map(|c| (c, vec![0])).collect();
    let one = double_and_assemble(&single, &[CorpusPants { pants_id: 0, cuffs }]);
    let one_ok = matches!(&one, Ok(s) if s.euler == -2 && s.components.len() == 1);
    let xi = 0.01;
    let mut problems = Vec::new();
    let mut eulers = Vec::new();
    for seed in 0..5 {
        let c = match orbit_corpus(4, 10, xi, seed) {
            Ok(c) => c,
            Err(e) => {
                problems.push(e.to_string());
                continue;
            }
        };
        let mut matchings = BTreeMap::new();
        for (id, atlas) in &c.curves {
            match find_matching(atlas, xi) {
                MatchingResult::Perfect { sigma, .. } => {
                    matchings.insert(*id, sigma);
                }
                _ => problems.push(format!("seed {seed}: curve {id} unmatched")),
            }
        }
        match double_and_assemble(&matchings, &c.pants) {
            Ok(s) => {
                if !(s.euler == -(s.copies.len() as i64) && s.copies.len() == 20 && s.degrees.iter().all(|&d| d == 3) && s.fixed_point_free && s.involutive) {
                    problems.push(format!("seed {seed}: chi {} copies {}", s.euler, s.copies.len()));
                }
                eulers.push(s.euler);
            }
            Err(e) => problems.push(e.to_string()),
        }
    }
    Line::new(
        one_ok && problems.is_empty(),
        format!(
            "single pants chi {:?}; 10-pants corpora chi {eulers:?} over 20 copies{}",
            one.map(|s| s.euler).ok(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn report(id: &str, name: &str, line: &Line, took: Duration, limit: Option<Duration>) -> bool {
    let late = limit.is_some_and(|l| took > l);
    let pass = line.pass && !late;
    let status = if pass { "PASS" } else { "FAIL" };
    let tag = if !pass && line.infeasible { " [infeasible at desk scale]" } else { "" };
    let time = match limit {
        Some(l) => format!("{:.1}s of {}s", took.as_secs_f64(), l.as_secs()),
        None => format!("{:.1}s", took.as_secs_f64()),
    };
    println!("{status} {id:>3} {name}: {} ({time}){tag}", line.detail);
    pass || line.infeasible
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn main() {
    // positional arguments select criteria by number; libtest flags are ignored
    let args: Vec<String> = std::env::args().skip(1).collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    let picked: Vec<&String> = args.iter().filter(|a| !a.starts_with('-')).collect();
    let want = |id: &str| picked.is_empty() || picked.iter().any(|p| p.as_str() == id);
    let secs = Duration::from_secs;
    let mut ok = true;
    if want("1") {
        let (l, t) = timed(c1_nan);
        ok &= report("1", "NAN factorisation", &l, t, Some(secs(10)));
    }
    if want("2") {
        let (l, t) = timed(c2_words);
        ok &= report("2", "absorption and eight-words", &l, t, Some(secs(30)));
    }
    if want("3") {
        let (l, t) = timed(c3_steiner);
        ok &= report("3", "Fermat points and Steiner graphs", &l, t, Some(secs(60)));
    }
    if want("4") {
        let (l, t) = timed(c4_dichotomy);
        ok &= report("4", "good/bad dichotomy", &l, t, Some(secs(300)));
    }
    if want("5") {
        let (l, t) = timed(c5_diamonds);
        ok &= report("5", "diamond areas", &l, t, None);
    }
    if want("6") {
        let (l, t) = timed(c6_ball_volumes);
        ok &= report("6", "ball intersection volumes", &l, t, Some(secs(300)));
    }
    let mut density = None;
    if want("7") {
        let ((l, d), t) = timed(c7_quasi_uniform);
        ok &= report("7", "quasi-uniformity", &l, t, Some(secs(900)));
        density = Some(d);
    }
    if want("8") {
        let (l, t) = timed(c8_drift);
        ok &= report("8", "average-foot drift", &l, t, None);
    }
    if want("9") {
        let (lines, t) = timed(|| {
            let d = density.unwrap_or_else(|| estimated_measure(&density_spec(10.0, 0.1), &FootGrid { s_bins: 1, sphere_cells: 32 }, &FiberConfig::default()));
            c9_matching(&d)
        });
        for (i, (name, l)) in lines.iter().enumerate() {
            let id = format!("9{}", (b'a' + i as u8) as char);
            // the runtime limit covers the whole criterion
            ok &= report(&id, &format!("matching, {name}"), l, t, Some(secs(120)));
        }
    }
    if want("10") {
        let (l, t) = timed(c10_cheeger);
        ok &= report("10", "Cheeger bound and growth", &l, t, None);
    }
    if want("11") {
        let (l, t) = timed(c11_assembly);
        ok &= report("11", "doubling and assembly", &l, t, None);
    }
    if !ok {
        std::process::exit(1);
    }
}
