//! Foot atlases on `N¹(γ₀)`, the `τ` matching, Hall certificates, Cheeger
//! estimates for sphere bundles over a circle, and surface assembly by
//! doubling.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::PI;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::foot::{rng_for, sphere_mesh, sphere_volume, DensityEstimate};
use crate::geometry::{parallel_transport, ModelClosedGeodesic, NormalFiberPoint};
use crate::lorentz::so::random_unit;
use crate::lorentz::sphere_distance;
use crate::pants::FootPair;
use crate::{Mat, Vector};

pub use crate::foot::tau;

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("pants {pants} cuff {cuff} has no matched partner")]
    UnmatchedBoundary { pants: u64, cuff: usize },
    #[error("gluing involution clash: {0}")]
    InvolutionClash(String),
    #[error("mesh too coarse: estimate {coarse} moved to {fine} under refinement")]
    MeshTooCoarse { coarse: f64, fine: f64 },
}

// ---------------------------------------------------------------------------
// τ and the metric

/// Parallel transport by `t` along the orientation.
pub fn transport(g: &ModelClosedGeodesic, x: &NormalFiberPoint, t: f64) -> NormalFiberPoint {
    g.normalize(x.s + t, &x.w)
}

/// Fiberwise antipodal map.
pub fn antipodal(x: &NormalFiberPoint) -> NormalFiberPoint {
    NormalFiberPoint { s: x.s, w: -&x.w }
}

/// `τ⁻¹(s, w) = (s − 1, −w)`.
pub fn tau_inverse(g: &ModelClosedGeodesic, x: &NormalFiberPoint) -> NormalFiberPoint {
    g.normalize(x.s - 1.0, &(-&x.w))
}

/// `N¹` distance with the holonomy powers cached.
#[derive(Clone, Debug)]
struct Metric {
    l: f64,
    lam: Mat,
    lam_t: Mat,
}

impl Metric {
    fn new(g: &ModelClosedGeodesic) -> Self {
        Self {
            l: g.length,
            lam: g.holonomy.clone(),
            lam_t: g.holonomy.transpose(),
        }
    }

    fn dist(&self, x: &NormalFiberPoint, y: &NormalFiberPoint) -> f64 {
        let mut best = f64::INFINITY;
        for k in [0i64, 1, -1] {
            let ds = y.s + k as f64 * self.l - x.s;
            if ds.abs() >= best {
                continue;
            }
            let a = match k {
                0 => sphere_distance(&x.w, &y.w),
                1 => sphere_distance(&x.w, &(&self.lam_t * &y.w)),
                _ => sphere_distance(&x.w, &(&self.lam * &y.w)),
            };
            best = best.min(ds.hypot(a));
        }
        best
    }
}

// ---------------------------------------------------------------------------
// atlases

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Plus => 1.0,
            Orientation::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Orientation::Plus => Orientation::Minus,
            Orientation::Minus => Orientation::Plus,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasEntry {
    pub pants_id: u64,
    pub orientation: Orientation,
    #[serde(flatten)]
    pub foot: NormalFiberPoint,
}

/// Average feet of pants along one good curve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FootAtlas {
    pub gamma0: ModelClosedGeodesic,
    pub entries: Vec<AtlasEntry>,
}

impl FootAtlas {
    /// Checks fiber dimensions, unit normals, the fundamental domain and
    /// per-pants orientation consistency.
    pub fn new(gamma0: ModelClosedGeodesic, entries: Vec<AtlasEntry>) -> Result<Self, MatchingError> {
        let m = gamma0.n() - 1;
        let mut tags: BTreeMap<u64, Orientation> = BTreeMap::new();
        for (i, e) in entries.iter().enumerate() {
            if e.foot.w.len() != m {
                return Err(MatchingError::Invalid(format!("entry {i}: fiber vector has length {}, expected {m}", e.foot.w.len())));
            }
            if (e.foot.w.norm() - 1.0).abs() > 1e-8 {
                return Err(MatchingError::Invalid(format!("entry {i}: fiber vector is not a unit vector")));
            }
            if !(0.0..gamma0.length).contains(&e.foot.s) {
                return Err(MatchingError::Invalid(format!("entry {i}: s = {} outside [0, {})", e.foot.s, gamma0.length)));
            }
            if let Some(o) = tags.insert(e.pants_id, e.orientation) {
                if o != e.orientation {
                    return Err(MatchingError::Invalid(format!("pants {} carries both orientations", e.pants_id)));
                }
            }
        }
        Ok(Self { gamma0, entries })
    }

    /// Entries with feet reduced to the fundamental domain (no checks).
    pub fn from_points(gamma0: ModelClosedGeodesic, feet: Vec<NormalFiberPoint>) -> Self {
        let entries = feet
            .into_iter()
            .enumerate()
            .map(|(i, f)| AtlasEntry {
                pants_id: i as u64,
                orientation: Orientation::Plus,
                foot: gamma0.normalize(f.s, &f.w),
            })
            .collect();
        Self { gamma0, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feet(&self) -> Vec<NormalFiberPoint> {
        self.entries.iter().map(|e| e.foot.clone()).collect()
    }
}

/// Synthetic foot distributions.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum AtlasMode {
    /// I.i.d. feet from a density estimate.
    QuasiUniform(DensityEstimate),
    /// Polar caps around `±e_{n−1}`, feet split `north : south`.
    IceCap { imbalance: (u32, u32), radius: f64 },
    /// Latitude bands at colatitude `θ` and `π − θ`.
    Bands { colatitude: f64, half_width: f64, imbalance: (u32, u32) },
}

/// North pole of the fiber sphere used by the cap and band scenarios.
pub fn fiber_axis(g: &ModelClosedGeodesic) -> Vector {
    let m = g.n() - 1;
    let mut a = Vector::zeros(m);
    a[m - 1] = 1.0;
    a
}

fn colatitude(axis: &Vector, w: &Vector) -> f64 {
    axis.dot(w).clamp(-1.0, 1.0).acos()
}

/// Uniform point of `S^{m−1}` with colatitude in `[lo, hi]`.
fn sample_band<R: Rng + ?Sized>(axis: &Vector, lo: f64, hi: f64, rng: &mut R) -> Vector {
    let m = axis.len();
    let (lo, hi) = (lo.max(0.0), hi.min(PI));
    if m == 1 {
        return if lo <= 0.0 { axis.clone() } else { -axis };
    }
    let peak = if lo <= PI / 2.0 && hi >= PI / 2.0 { 1.0 } else { lo.sin().max(hi.sin()) };
    let theta = loop {
        let t = rng.random_range(lo..=hi);
        if m == 2 || rng.random::<f64>() * peak.powi(m as i32 - 2) <= t.sin().powi(m as i32 - 2) {
            break t;
        }
    };
    let u = loop {
        let v = random_unit(m, rng);
        let p = &v - axis * axis.dot(&v);
        let n = p.norm();
        if n > 1e-9 {
            break p / n;
        }
    };
    axis * theta.cos() + u * theta.sin()
}

fn split(n: usize, (a, b): (u32, u32)) -> Result<(usize, usize), MatchingError> {
    if a + b == 0 {
        return Err(MatchingError::Invalid("imbalance 0:0".into()));
    }
    let first = ((n as f64) * a as f64 / (a + b) as f64).round() as usize;
    Ok((first.min(n), n - first.min(n)))
}

/// Feet in two antipodal latitude bands: the minority band holds jittered
/// `τ`-images of majority feet, the surplus sits unpaired in the majority
/// band.
fn band_feet<R: Rng + ?Sized>(
    g: &ModelClosedGeodesic,
    upper: (f64, f64),
    counts: (usize, usize),
    rng: &mut R,
) -> Vec<NormalFiberPoint> {
    let axis = fiber_axis(g);
    let lower = (PI - upper.1, PI - upper.0);
    let (major, minor, n_major, n_minor) = if counts.0 >= counts.1 {
        (upper, lower, counts.0, counts.1)
    } else {
        (lower, upper, counts.1, counts.0)
    };
    let jitter = 0.1 * (major.1 - major.0).max(1e-3) / 2.0;
    let m = axis.len();
    let mut out = Vec::with_capacity(n_major + n_minor);
    for k in 0..n_major {
        let p = NormalFiberPoint {
            s: rng.random_range(0.0..g.length),
            w: sample_band(&axis, major.0, major.1, rng),
        };
        if k < n_minor {
            let q = tau(g, &p);
            let mut partner = q.clone();
            if m > 1 {
                for _ in 0..64 {
                    let t = random_unit(m, rng);
                    let t = &t - &q.w * q.w.dot(&t);
                    let w = (&q.w + t * (jitter * rng.random::<f64>())).normalize();
                    let c = colatitude(&axis, &w);
                    if c >= minor.0 && c <= minor.1 {
                        partner = NormalFiberPoint { s: q.s, w };
                        break;
                    }
                }
            }
            out.push(partner);
        }
        out.push(p);
    }
    out
}

/// Draws `n` feet; deterministic in `seed`.
pub fn synthesize_atlas(g: &ModelClosedGeodesic, mode: &AtlasMode, n: usize, seed: u64) -> Result<FootAtlas, MatchingError> {
    let mut rng = rng_for(seed, 0x6d61);
    let m = g.n() - 1;
    let mut feet = match mode {
        AtlasMode::QuasiUniform(est) => {
            let cells = est.grid.sphere_cells;
            if est.points.len() != est.grid.s_bins * cells || est.points.first().is_some_and(|p| p.w.len() != m) {
                return Err(MatchingError::Invalid("density grid does not fit the curve".into()));
            }
            let mesh: Vec<Vector> = est.points[..cells].iter().map(|p| p.w.clone()).collect();
            let max = est.values.iter().cloned().fold(0.0, f64::max);
            if !(max > 0.0) {
                return Err(MatchingError::Invalid("density estimate vanishes".into()));
            }
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let s = rng.random_range(0.0..g.length);
                let w = random_unit(m, &mut rng);
                let v = density_at(est, &mesh, g.length, s, &w);
                if rng.random::<f64>() * max < v {
                    out.push(NormalFiberPoint { s, w });
                }
            }
            out
        }
        AtlasMode::IceCap { imbalance, radius } => {
            if !(*radius > 0.0 && *radius < PI / 2.0) {
                return Err(MatchingError::Invalid(format!("cap radius {radius} outside (0, π/2)")));
            }
            band_feet(g, (0.0, *radius), split(n, *imbalance)?, &mut rng)
        }
        AtlasMode::Bands { colatitude, half_width, imbalance } => {
            let (lo, hi) = (colatitude - half_width, colatitude + half_width);
            if !(*half_width > 0.0 && lo >= 0.0 && hi < PI / 2.0) {
                return Err(MatchingError::Invalid("bands must lie in the open upper hemisphere".into()));
            }
            band_feet(g, (lo, hi), split(n, *imbalance)?, &mut rng)
        }
    };
    feet.shuffle(&mut rng);
    Ok(FootAtlas::from_points(g.clone(), feet))
}

/// Piecewise constant density: `s`-bin times nearest mesh point.
fn density_at(est: &DensityEstimate, mesh: &[Vector], l: f64, s: f64, w: &Vector) -> f64 {
    let bins = est.grid.s_bins;
    let i = ((s / l * bins as f64).floor() as usize).min(bins - 1);
    let c = nearest(mesh, w);
    est.values[i * mesh.len() + c]
}

fn nearest(mesh: &[Vector], w: &Vector) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for (c, p) in mesh.iter().enumerate() {
        let d = p.dot(w);
        if d > best.0 {
            best = (d, c);
        }
    }
    best.1
}

// ---------------------------------------------------------------------------
// bipartite graph and matching

/// Edges `π → π′` with `d(p(π′), τ(p(π))) < ξ`, found through an `s`-sorted
/// index.
#[derive(Clone, Debug)]
pub struct TauGraph {
    /// source → targets with distances
    pub adj: Vec<Vec<(usize, f64)>>,
}

impl TauGraph {
    pub fn build(atlas: &FootAtlas, xi: f64) -> Self {
        let g = &atlas.gamma0;
        let metric = Metric::new(g);
        let n = atlas.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| atlas.entries[a].foot.s.total_cmp(&atlas.entries[b].foot.s));
        let keys: Vec<f64> = order.iter().map(|&i| atlas.entries[i].foot.s).collect();
        let l = g.length;
        let adj = atlas
            .entries
            .iter()
            .map(|e| {
                let t = tau(g, &e.foot);
                let mut out = Vec::new();
                let mut scan = |lo: f64, hi: f64| {
                    let a = keys.partition_point(|&k| k < lo);
                    let b = keys.partition_point(|&k| k < hi);
                    for &j in &order[a..b] {
                        let d = metric.dist(&t, &atlas.entries[j].foot);
                        if d < xi {
                            out.push((j, d));
                        }
                    }
                };
                if xi * 2.0 >= l {
                    scan(f64::NEG_INFINITY, f64::INFINITY);
                } else {
                    let (lo, hi) = (t.s - xi, t.s + xi);
                    scan(lo.max(0.0), hi.min(l));
                    if lo < 0.0 {
                        scan(lo + l, l);
                    }
                    if hi > l {
                        scan(0.0, hi - l);
                    }
                }
                out.sort_by_key(|p| p.0);
                out.dedup_by_key(|p| p.0);
                out
            })
            .collect();
        Self { adj }
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum()
    }

    fn reverse(&self) -> Vec<Vec<usize>> {
        let mut r = vec![Vec::new(); self.adj.len()];
        for (i, row) in self.adj.iter().enumerate() {
            for &(j, _) in row {
                r[j].push(i);
            }
        }
        r
    }
}

/// Hopcroft–Karp on `adj` (left → right); returns `(match_left, match_right)`.
pub fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> (Vec<Option<usize>>, Vec<Option<usize>>) {
    let n_left = adj.len();
    let mut ml: Vec<Option<usize>> = vec![None; n_left];
    let mut mr: Vec<Option<usize>> = vec![None; n_right];
    let inf = usize::MAX;
    let mut dist = vec![inf; n_left];
    loop {
        // layered BFS from free left vertices
        let mut queue = VecDeque::new();
        for u in 0..n_left {
            if ml[u].is_none() {
                dist[u] = 0;
                queue.push_back(u);
            } else {
                dist[u] = inf;
            }
        }
        let mut free_layer = inf;
        while let Some(u) = queue.pop_front() {
            if dist[u] >= free_layer {
                continue;
            }
            for &w in &adj[u] {
                match mr[w] {
                    None => free_layer = free_layer.min(dist[u] + 1),
                    Some(u2) if dist[u2] == inf => {
                        dist[u2] = dist[u] + 1;
                        queue.push_back(u2);
                    }
                    _ => {}
                }
            }
        }
        if free_layer == inf {
            break;
        }
        // iterative DFS along the layers
        let mut it = vec![0usize; n_left];
        for root in 0..n_left {
            if ml[root].is_some() {
                continue;
            }
            let mut stack = vec![root];
            let mut via: Vec<usize> = Vec::new();
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = inf;
                    stack.pop();
                    via.pop();
                    continue;
                }
                let w = adj[u][it[u]];
                it[u] += 1;
                match mr[w] {
                    None if dist[u] + 1 == free_layer => {
                        via.push(w);
                        for (&x, &y) in stack.iter().zip(&via) {
                            ml[x] = Some(y);
                            mr[y] = Some(x);
                        }
                        break;
                    }
                    Some(u2) if dist[u2] == dist[u] + 1 && dist[u2] != inf => {
                        via.push(w);
                        stack.push(u2);
                    }
                    _ => {}
                }
            }
        }
    }
    (ml, mr)
}

/// A set `T` of target entries whose feet have fewer `τ`-preimages within
/// `ξ` than `|T|`: with `A = τ⁻¹(feet of T)`, `ν(N_ξ(A)) < ν(τA)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HallCertificate {
    pub targets: Vec<usize>,
    pub preimages: Vec<usize>,
    pub deficiency: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum MatchingResult {
    Perfect { sigma: Vec<usize>, max_displacement: f64 },
    HallViolation { certificate: HallCertificate, matched: usize },
}

impl MatchingResult {
    pub fn is_perfect(&self) -> bool {
        matches!(self, MatchingResult::Perfect { .. })
    }
}

/// Alternating reachability from unmatched targets.
fn konig_targets(graph: &TauGraph, ml: &[Option<usize>], mr: &[Option<usize>]) -> HallCertificate {
    let radj = graph.reverse();
    let n = mr.len();
    let mut seen_t = vec![false; n];
    let mut seen_s = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&j| mr[j].is_none()).collect();
    for &j in &queue {
        seen_t[j] = true;
    }
    while let Some(j) = queue.pop_front() {
        for &i in &radj[j] {
            if !seen_s[i] {
                seen_s[i] = true;
                if let Some(j2) = ml[i] {
                    if !seen_t[j2] {
                        seen_t[j2] = true;
                        queue.push_back(j2);
                    }
                }
            }
        }
    }
    let targets: Vec<usize> = (0..n).filter(|&j| seen_t[j]).collect();
    let preimages: Vec<usize> = (0..n).filter(|&i| seen_s[i]).collect();
    HallCertificate {
        deficiency: targets.len() - preimages.len(),
        targets,
        preimages,
    }
}

/// Permutation `σ` with `d(p(σπ), τ(pπ)) < ξ`, or a König certificate.
pub fn find_matching(atlas: &FootAtlas, xi: f64) -> MatchingResult {
    let graph = TauGraph::build(atlas, xi);
    let adj: Vec<Vec<usize>> = graph.adj.iter().map(|r| r.iter().map(|p| p.0).collect()).collect();
    let (ml, mr) = hopcroft_karp(&adj, atlas.len());
    let matched = ml.iter().flatten().count();
    if matched == atlas.len() {
        let metric = Metric::new(&atlas.gamma0);
        let sigma: Vec<usize> = ml.iter().map(|m| m.expect("perfect")).collect();
        let max_displacement = sigma
            .iter()
            .enumerate()
            .map(|(i, &j)| metric.dist(&tau(&atlas.gamma0, &atlas.entries[i].foot), &atlas.entries[j].foot))
            .fold(0.0, f64::max);
        MatchingResult::Perfect { sigma, max_displacement }
    } else {
        MatchingResult::HallViolation {
            certificate: konig_targets(&graph, &ml, &mr),
            matched,
        }
    }
}

/// Brute-force recount: entries whose `τ`-image lies within `ξ` of a
/// certificate foot.
pub fn recount_preimages(atlas: &FootAtlas, xi: f64, targets: &[usize]) -> usize {
    let g = &atlas.gamma0;
    let metric = Metric::new(g);
    atlas
        .entries
        .iter()
        .filter(|e| {
            let t = tau(g, &e.foot);
            targets.iter().any(|&j| metric.dist(&t, &atlas.entries[j].foot) < xi)
        })
        .count()
}

/// A certificate is genuine when the recount is below `|T|`.
pub fn verify_certificate(atlas: &FootAtlas, xi: f64, cert: &HallCertificate) -> bool {
    !cert.targets.is_empty() && recount_preimages(atlas, xi, &cert.targets) < cert.targets.len()
}

/// Checks a permutation against the displacement bound pair by pair.
pub fn verify_sigma(atlas: &FootAtlas, xi: f64, sigma: &[usize]) -> bool {
    let n = atlas.len();
    if sigma.len() != n {
        return false;
    }
    let mut hit = vec![false; n];
    for &j in sigma {
        if j >= n || std::mem::replace(&mut hit[j], true) {
            return false;
        }
    }
    let metric = Metric::new(&atlas.gamma0);
    sigma
        .iter()
        .enumerate()
        .all(|(i, &j)| metric.dist(&tau(&atlas.gamma0, &atlas.entries[i].foot), &atlas.entries[j].foot) < xi)
}

/// Smallest `ξ*` such that a matching exists for every `ξ > ξ*`.
pub fn bottleneck_xi(atlas: &FootAtlas) -> f64 {
    let g = &atlas.gamma0;
    let metric = Metric::new(g);
    let n = atlas.len();
    if n == 0 {
        return 0.0;
    }
    let taus: Vec<NormalFiberPoint> = atlas.entries.iter().map(|e| tau(g, &e.foot)).collect();
    let d: Vec<Vec<f64>> = taus
        .iter()
        .map(|t| atlas.entries.iter().map(|e| metric.dist(t, &e.foot)).collect())
        .collect();
    let mut cand: Vec<f64> = d.iter().flatten().copied().collect();
    cand.sort_by(f64::total_cmp);
    cand.dedup();
    let feasible = |r: f64| {
        let adj: Vec<Vec<usize>> = d.iter().map(|row| (0..n).filter(|&j| row[j] <= r).collect()).collect();
        hopcroft_karp(&adj, n).0.iter().all(Option::is_some)
    };
    let (mut lo, mut hi) = (0usize, cand.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feasible(cand[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    cand[lo]
}

// ---------------------------------------------------------------------------
// exact Hall check by max flow

struct FlowEdge {
    to: usize,
    cap: i32,
}

/// Dinic on unit capacities.
struct Flow {
    edges: Vec<FlowEdge>,
    head: Vec<Vec<usize>>,
}

impl Flow {
    fn new(n: usize) -> Self {
        Self {
            edges: Vec::new(),
            head: vec![Vec::new(); n],
        }
    }

    fn add(&mut self, a: usize, b: usize) {
        self.head[a].push(self.edges.len());
        self.edges.push(FlowEdge { to: b, cap: 1 });
        self.head[b].push(self.edges.len());
        self.edges.push(FlowEdge { to: a, cap: 0 });
    }

    fn levels(&self, s: usize) -> Vec<i64> {
        let mut level = vec![-1i64; self.head.len()];
        level[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(u) = q.pop_front() {
            for &e in &self.head[u] {
                let v = self.edges[e].to;
                if self.edges[e].cap > 0 && level[v] < 0 {
                    level[v] = level[u] + 1;
                    q.push_back(v);
                }
            }
        }
        level
    }

    fn push(&mut self, u: usize, t: usize, level: &[i64], it: &mut [usize]) -> bool {
        if u == t {
            return true;
        }
        while it[u] < self.head[u].len() {
            let e = self.head[u][it[u]];
            let v = self.edges[e].to;
            if self.edges[e].cap > 0 && level[v] == level[u] + 1 && self.push(v, t, level, it) {
                self.edges[e].cap -= 1;
                self.edges[e ^ 1].cap += 1;
                return true;
            }
            it[u] += 1;
        }
        false
    }

    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let mut total = 0;
        loop {
            let level = self.levels(s);
            if level[t] < 0 {
                return total;
            }
            let mut it = vec![0; self.head.len()];
            while self.push(s, t, &level, &mut it) {
                total += 1;
            }
        }
    }
}

/// Max flow from targets to their preimages; the residual source side of the
/// minimum cut is the maximal-deficiency target set.
pub fn exact_hall(atlas: &FootAtlas, xi: f64) -> (usize, Option<HallCertificate>) {
    let graph = TauGraph::build(atlas, xi);
    let n = atlas.len();
    let (s, t) = (0, 2 * n + 1);
    let mut flow = Flow::new(2 * n + 2);
    for j in 0..n {
        flow.add(s, 1 + j);
        flow.add(1 + n + j, t);
    }
    for (i, row) in graph.adj.iter().enumerate() {
        for &(j, _) in row {
            flow.add(1 + j, 1 + n + i);
        }
    }
    let f = flow.max_flow(s, t);
    let deficiency = n - f;
    if deficiency == 0 {
        return (0, None);
    }
    let reach = flow.levels(s);
    let targets: Vec<usize> = (0..n).filter(|&j| reach[1 + j] >= 0).collect();
    let preimages: Vec<usize> = (0..n).filter(|&i| reach[1 + n + i] >= 0).collect();
    (
        deficiency,
        Some(HallCertificate {
            deficiency: targets.len() - preimages.len(),
            targets,
            preimages,
        }),
    )
}

/// Test regions `A ⊂ N¹(γ₀)` for `ν(N_ξ(A)) ≥ ν(τA)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum TestRegion {
    Full,
    /// Product-metric ball.
    Cap { center: NormalFiberPoint, radius: f64 },
    /// All `s`, colatitude from `axis` in `[lo, hi]`; meaningful when the
    /// holonomy fixes `axis`.
    Band {
        #[serde(with = "crate::serde_mat::vector")]
        axis: Vector,
        lo: f64,
        hi: f64,
    },
    Union(Vec<TestRegion>),
    Points(Vec<NormalFiberPoint>),
}

impl TestRegion {
    fn distance(&self, metric: &Metric, p: &NormalFiberPoint) -> f64 {
        match self {
            TestRegion::Full => 0.0,
            TestRegion::Cap { center, radius } => (metric.dist(p, center) - radius).max(0.0),
            TestRegion::Band { axis, lo, hi } => {
                let c = colatitude(axis, &p.w);
                (lo - c).max(c - hi).max(0.0)
            }
            TestRegion::Union(parts) => parts.iter().map(|r| r.distance(metric, p)).fold(f64::INFINITY, f64::min),
            TestRegion::Points(pts) => pts.iter().map(|q| metric.dist(p, q)).fold(f64::INFINITY, f64::min),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HallTest {
    pub label: String,
    /// `ν(τA)`.
    pub tau_mass: usize,
    /// `ν(N_ξ(A))`.
    pub neighbourhood_mass: usize,
    pub margin: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HallReport {
    pub xi: f64,
    pub tests: Vec<HallTest>,
    pub exact_deficiency: usize,
    pub exact_certificate: Option<HallCertificate>,
    /// Smallest margin over the family (the exact certificate excluded).
    pub family_min_margin: i64,
    pub family_violation: bool,
    /// The exact check and the family agree on whether a violation exists.
    pub agree: bool,
}

/// Evaluates `ν(N_ξ(A)) ≥ ν(τA)` on `A`.
pub fn hall_test(atlas: &FootAtlas, xi: f64, label: &str, region: &TestRegion) -> HallTest {
    let g = &atlas.gamma0;
    let metric = Metric::new(g);
    let mut tau_mass = 0;
    let mut nb = 0;
    for e in &atlas.entries {
        if region.distance(&metric, &tau_inverse(g, &e.foot)) <= 1e-12 {
            tau_mass += 1;
        }
        if region.distance(&metric, &e.foot) < xi {
            nb += 1;
        }
    }
    HallTest {
        label: label.to_string(),
        tau_mass,
        neighbourhood_mass: nb,
        margin: nb as i64 - tau_mass as i64,
    }
}

/// Runs the family and the min-cut certificate.
pub fn hall_check(atlas: &FootAtlas, xi: f64, family: &[(String, TestRegion)]) -> HallReport {
    let g = &atlas.gamma0;
    let mut tests: Vec<HallTest> = family.iter().map(|(l, r)| hall_test(atlas, xi, l, r)).collect();
    let family_min_margin = tests.iter().map(|t| t.margin).min().unwrap_or(0);
    let (exact_deficiency, exact_certificate) = exact_hall(atlas, xi);
    if let Some(c) = &exact_certificate {
        let pts = c.targets.iter().map(|&j| tau_inverse(g, &atlas.entries[j].foot)).collect();
        tests.push(hall_test(atlas, xi, "min-cut", &TestRegion::Points(pts)));
    }
    let family_violation = family_min_margin < 0;
    HallReport {
        xi,
        tests,
        exact_deficiency,
        exact_certificate,
        family_min_margin,
        family_violation,
        agree: family_violation == (exact_deficiency > 0),
    }
}

/// Full space, polar caps, antipodal band pairs, and random unions of small
/// balls around grid cells.
pub fn standard_family(g: &ModelClosedGeodesic, unions: usize, seed: u64) -> Vec<(String, TestRegion)> {
    let axis = fiber_axis(g);
    let mut out = vec![("full".to_string(), TestRegion::Full)];
    for r in [0.1, 0.2, 0.4, 0.8] {
        out.push((format!("north cap {r}"), TestRegion::Band { axis: axis.clone(), lo: 0.0, hi: r }));
        out.push((format!("south cap {r}"), TestRegion::Band { axis: axis.clone(), lo: PI - r, hi: PI }));
    }
    for k in 1..6 {
        let c = k as f64 * PI / 12.0;
        for hw in [0.05, 0.15] {
            out.push((format!("band {c:.3}±{hw}"), TestRegion::Band { axis: axis.clone(), lo: c - hw, hi: c + hw }));
            out.push((
                format!("band {:.3}±{hw}", PI - c),
                TestRegion::Band { axis: axis.clone(), lo: PI - c - hw, hi: PI - c + hw },
            ));
        }
    }
    let m = g.n() - 1;
    let bins = (g.length / 0.5).ceil().max(1.0) as usize;
    let mesh = sphere_mesh(m, 32);
    let cell = (g.length / bins as f64).hypot(2.0 / (mesh.len() as f64).sqrt());
    let mut rng = rng_for(seed, 0x6e62);
    for u in 0..unions {
        let k = rng.random_range(1..=8usize);
        let parts = (0..k)
            .map(|_| TestRegion::Cap {
                center: NormalFiberPoint {
                    s: (rng.random_range(0..bins) as f64 + 0.5) * g.length / bins as f64,
                    w: mesh[rng.random_range(0..mesh.len())].clone(),
                },
                radius: cell * rng.random_range(0.25..1.0),
            })
            .collect();
        out.push((format!("cells {u}"), TestRegion::Union(parts)));
    }
    out
}

// ---------------------------------------------------------------------------
// Cheeger estimates

/// Fiber mesh for [`cheeger_bundle_bound`]; `s`-bins have width at most
/// `min(0.1, L/64)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct CheegerMesh {
    pub sphere_cells: usize,
    /// Monte Carlo samples for the fiber cell areas and shared boundaries.
    pub area_samples: usize,
    pub seed: u64,
}

impl Default for CheegerMesh {
    fn default() -> Self {
        Self {
            sphere_cells: 48,
            area_samples: 400_000,
            seed: 0xc4e6,
        }
    }
}

/// Voronoi cells of a sphere mesh: areas and shared boundary measures.
struct FiberCells {
    mesh: Vec<Vector>,
    area: Vec<f64>,
    /// `(a, b, shared (m−2)-measure, centre distance)`
    faces: Vec<(usize, usize, f64, f64)>,
}

fn fiber_cells(m: usize, cells: usize, samples: usize, seed: u64) -> FiberCells {
    let mesh = sphere_mesh(m, cells);
    let vol = sphere_volume(m - 1);
    let k = mesh.len();
    let mut count = vec![0usize; k];
    let mut face: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let spacing = (vol / k as f64).powf(1.0 / (m - 1) as f64);
    let h = 0.1 * spacing;
    let mut rng = rng_for(seed, 0x6663);
    let tangent = |c: &Vector, w: &Vector| {
        // gradient of the angle to c
        let t = w * w.dot(c) - c;
        let n = t.norm();
        if n > 1e-12 {
            t / n
        } else {
            t
        }
    };
    for _ in 0..samples {
        let w = random_unit(m, &mut rng);
        let (mut a, mut b) = ((f64::NEG_INFINITY, 0), (f64::NEG_INFINITY, 0));
        for (c, p) in mesh.iter().enumerate() {
            let d = p.dot(&w);
            if d > a.0 {
                b = a;
                a = (d, c);
            } else if d > b.0 {
                b = (d, c);
            }
        }
        count[a.1] += 1;
        // coarea: the slab 0 ≤ α_b − α_a < h around the bisector
        let gap = b.0.clamp(-1.0, 1.0).acos() - a.0.clamp(-1.0, 1.0).acos();
        if gap < h {
            let grad = (tangent(&mesh[b.1], &w) - tangent(&mesh[a.1], &w)).norm();
            let key = (a.1.min(b.1), a.1.max(b.1));
            *face.entry(key).or_default() += grad / h;
        }
    }
    let unit = vol / samples as f64;
    let area = count.iter().map(|&c| c as f64 * unit).collect();
    let faces = face
        .into_iter()
        .map(|((a, b), v)| (a, b, v * unit, sphere_distance(&mesh[a], &mesh[b])))
        .collect();
    FiberCells { mesh, area, faces }
}

/// `N¹(γ₀)` as a weighted graph on `s`-bins × fiber cells.
struct BundleGraph {
    bins: usize,
    ds: f64,
    cells: FiberCells,
    vol: Vec<f64>,
    /// `(u, v, shared area, length)`
    edges: Vec<(usize, usize, f64, f64)>,
    fwd: Vec<usize>,
    bwd: Vec<usize>,
    /// fiber neighbours sorted by angle
    near: Vec<Vec<(f64, usize)>>,
}

impl BundleGraph {
    fn new(g: &ModelClosedGeodesic, mesh: &CheegerMesh) -> Self {
        let m = g.n() - 1;
        let l = g.length;
        let width = 0.1f64.min(l / 64.0);
        let mut bins = (l / width).ceil() as usize;
        bins += bins % 2;
        let ds = l / bins as f64;
        let cells = fiber_cells(m, mesh.sphere_cells, mesh.area_samples, mesh.seed);
        let k = cells.mesh.len();
        let fwd: Vec<usize> = cells.mesh.iter().map(|w| nearest(&cells.mesh, &(&g.holonomy * w))).collect();
        let bwd: Vec<usize> = cells.mesh.iter().map(|w| nearest(&cells.mesh, &(g.holonomy.transpose() * w))).collect();
        let mut vol = Vec::with_capacity(bins * k);
        for _ in 0..bins {
            vol.extend(cells.area.iter().map(|a| a * ds));
        }
        let mut edges = Vec::new();
        for i in 0..bins {
            for &(a, b, area, len) in &cells.faces {
                edges.push((i * k + a, i * k + b, area * ds, len));
            }
            for c in 0..k {
                let (j, d) = if i + 1 == bins { (0, fwd[c]) } else { (i + 1, c) };
                edges.push((i * k + c, j * k + d, cells.area[c], ds));
            }
        }
        let near = cells
            .mesh
            .iter()
            .map(|p| {
                let mut v: Vec<(f64, usize)> = cells.mesh.iter().enumerate().map(|(c, q)| (sphere_distance(p, q), c)).collect();
                v.sort_by(|a, b| a.0.total_cmp(&b.0));
                v
            })
            .collect();
        Self {
            bins,
            ds,
            cells,
            vol,
            edges,
            fwd,
            bwd,
            near,
        }
    }

    fn len(&self) -> usize {
        self.vol.len()
    }

    fn k(&self) -> usize {
        self.cells.mesh.len()
    }

    /// `min_S |∂S| / min(|S|, |M − S|)` over the prefixes of `order`.
    fn sweep(&self, order: &[usize]) -> (f64, usize) {
        let n = self.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(u, v, a, _) in &self.edges {
            if u != v {
                adj[u].push((v, a));
                adj[v].push((u, a));
            }
        }
        let total: f64 = self.vol.iter().sum();
        let mut inside = vec![false; n];
        let (mut cut, mut vol) = (0.0, 0.0);
        let mut best = (f64::INFINITY, 0);
        for (step, &u) in order.iter().enumerate().take(n - 1) {
            inside[u] = true;
            vol += self.vol[u];
            for &(v, a) in &adj[u] {
                if inside[v] {
                    cut -= a;
                } else {
                    cut += a;
                }
            }
            let ratio = cut / vol.min(total - vol);
            if ratio < best.0 {
                best = (ratio, step + 1);
            }
        }
        best
    }

    /// Fiedler vector of `L f = λ M f` by inverse iteration with CG solves.
    fn fiedler(&self, seed: u64) -> (Vec<f64>, f64) {
        let n = self.len();
        let mass = &self.vol;
        let total: f64 = mass.iter().sum();
        let lap = |x: &[f64], y: &mut [f64]| {
            y.iter_mut().for_each(|v| *v = 0.0);
            for &(u, v, a, len) in &self.edges {
                let w = a / len;
                let d = w * (x[u] - x[v]);
                y[u] += d;
                y[v] -= d;
            }
        };
        let project = |x: &mut [f64]| {
            let c = x.iter().zip(mass).map(|(a, m)| a * m).sum::<f64>() / total;
            x.iter_mut().for_each(|v| *v -= c);
        };
        let mut rng = rng_for(seed, 0x6669);
        let mut y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let mut lambda = 0.0;
        let mut ly = vec![0.0; n];
        for _ in 0..40 {
            project(&mut y);
            let norm = y.iter().zip(mass).map(|(a, m)| a * a * m).sum::<f64>().sqrt();
            y.iter_mut().for_each(|v| *v /= norm);
            let b: Vec<f64> = y.iter().zip(mass).map(|(a, m)| a * m).collect();
            let x = conjugate_gradient(&lap, &b, 1e-9, 4 * n);
            lap(&y, &mut ly);
            let next = ly.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
            let done = (next - lambda).abs() <= 1e-10 * next.abs();
            lambda = next;
            y = x;
            if done {
                break;
            }
        }
        project(&mut y);
        (y, lambda)
    }

    /// Nodes within `r` of some node of `set`.
    fn dilate(&self, set: &[bool], r: f64) -> Vec<bool> {
        let k = self.k();
        let bins = self.bins as i64;
        let mut out = vec![false; set.len()];
        let reach = ((r / self.ds).floor() as i64).min(bins / 2);
        for (u, _) in set.iter().enumerate().filter(|p| *p.1) {
            let (i, c) = ((u / k) as i64, u % k);
            for d in -reach..=reach {
                let rem2 = r * r - (d as f64 * self.ds).powi(2);
                if rem2 < 0.0 {
                    continue;
                }
                let rem = rem2.sqrt();
                let mut j = i + d;
                let mut cc = c;
                if j >= bins {
                    j -= bins;
                    cc = self.fwd[c];
                } else if j < 0 {
                    j += bins;
                    cc = self.bwd[c];
                }
                for &(a, e) in &self.near[cc] {
                    if a > rem {
                        break;
                    }
                    out[j as usize * k + e] = true;
                }
            }
        }
        out
    }

    fn measure(&self, set: &[bool]) -> f64 {
        set.iter().zip(&self.vol).filter(|p| *p.0).map(|p| p.1).sum()
    }
}

fn conjugate_gradient(op: &impl Fn(&[f64], &mut [f64]), b: &[f64], tol: f64, max_iter: usize) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut rr = dot(&r, &r);
    let stop = tol * tol * rr.max(1e-300);
    for _ in 0..max_iter {
        if rr <= stop {
            break;
        }
        op(&p, &mut ap);
        let alpha = rr / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let next = dot(&r, &r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    x
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepResult {
    pub label: String,
    pub ratio: f64,
    pub prefix: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub eta: f64,
    pub h: f64,
    pub tested: usize,
    /// Sets with `|N_η(A)| > |M|/2`, outside the theorem's hypothesis.
    pub skipped: usize,
    pub violations: usize,
    /// `min |N_η(A)| / ((1 + ηh)|A|)` over the tested sets.
    pub min_ratio: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CheegerReport {
    pub length: f64,
    pub r: f64,
    pub s_bins: usize,
    pub bin_width: f64,
    pub sphere_cells: usize,
    pub nodes: usize,
    pub sweeps: Vec<SweepResult>,
    /// Smallest sweep ratio.
    pub estimate: f64,
    /// Same estimate on the fiber mesh with twice the cells.
    pub refined_estimate: f64,
    pub fiedler_value: f64,
    /// Discrete ratio of `{s ∈ [0, L/2)}` and its closed form `4/L`.
    pub half_space_ratio: f64,
    pub half_space_exact: f64,
    /// `1/(4R)`.
    pub bound: f64,
    pub bound_holds: bool,
    pub growth: GrowthReport,
}

fn cheeger_sweeps(graph: &BundleGraph, seed: u64) -> (Vec<SweepResult>, f64) {
    let n = graph.len();
    let k = graph.k();
    let m = graph.cells.mesh[0].len();
    let mut out = Vec::new();
    let mut run = |label: String, key: Vec<f64>| {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| key[a].total_cmp(&key[b]));
        let (ratio, prefix) = graph.sweep(&order);
        out.push(SweepResult { label, ratio, prefix });
    };
    run("s".into(), (0..n).map(|u| (u / k) as f64 + (u % k) as f64 * 1e-6).collect());
    for a in 0..m {
        run(format!("w{a}"), (0..n).map(|u| graph.cells.mesh[u % k][a]).collect());
    }
    let (f, lambda) = graph.fiedler(seed);
    run("spectral".into(), f);
    (out, lambda)
}

/// Sweep-cut estimate of `h(N¹(γ₀))` checked against `1/(4R)`, plus the
/// growth inequality `|N_η(A)| ≥ (1 + η/(4R))|A|` on random balls and
/// slab-times-cap sets.
pub fn cheeger_bundle_bound(
    g: &ModelClosedGeodesic,
    r: f64,
    mesh: &CheegerMesh,
    growth_sets: usize,
    eta: f64,
) -> Result<CheegerReport, MatchingError> {
    if g.length > 3.0 * r {
        return Err(MatchingError::Invalid(format!("length {} exceeds 3R = {}", g.length, 3.0 * r)));
    }
    if g.n() < 3 {
        return Err(MatchingError::Invalid("the fiber sphere needs n ≥ 3".into()));
    }
    let graph = BundleGraph::new(g, mesh);
    let (sweeps, fiedler_value) = cheeger_sweeps(&graph, mesh.seed);
    let estimate = sweeps.iter().map(|s| s.ratio).fold(f64::INFINITY, f64::min);
    let fine = CheegerMesh {
        sphere_cells: 2 * mesh.sphere_cells,
        ..*mesh
    };
    let fine_graph = BundleGraph::new(g, &fine);
    let refined_estimate = cheeger_sweeps(&fine_graph, mesh.seed)
        .0
        .iter()
        .map(|s| s.ratio)
        .fold(f64::INFINITY, f64::min);
    if (refined_estimate - estimate).abs() > 0.1 * estimate {
        return Err(MatchingError::MeshTooCoarse {
            coarse: estimate,
            fine: refined_estimate,
        });
    }
    let k = graph.k();
    let half: Vec<bool> = (0..graph.len()).map(|u| u / k < graph.bins / 2).collect();
    let total: f64 = graph.vol.iter().sum();
    let half_cut: f64 = graph
        .edges
        .iter()
        .filter(|e| half[e.0] != half[e.1])
        .map(|e| e.2)
        .sum();
    let half_space_ratio = half_cut / graph.measure(&half).min(total - graph.measure(&half));
    let bound = 1.0 / (4.0 * r);
    let growth = growth_check(&graph, growth_sets, eta, bound, mesh.seed);
    Ok(CheegerReport {
        length: g.length,
        r,
        s_bins: graph.bins,
        bin_width: graph.ds,
        sphere_cells: k,
        nodes: graph.len(),
        sweeps,
        estimate,
        refined_estimate,
        fiedler_value,
        half_space_ratio,
        half_space_exact: 4.0 / g.length,
        bound,
        bound_holds: estimate >= bound,
        growth,
    })
}

fn growth_check(graph: &BundleGraph, sets: usize, eta: f64, h: f64, seed: u64) -> GrowthReport {
    let mut rng = rng_for(seed, 0x6772);
    let n = graph.len();
    let k = graph.k();
    let total: f64 = graph.vol.iter().sum();
    let l = graph.bins as f64 * graph.ds;
    let mut rep = GrowthReport {
        eta,
        h,
        tested: 0,
        skipped: 0,
        violations: 0,
        min_ratio: f64::INFINITY,
    };
    let mut attempts = 0;
    while rep.tested < sets && attempts < 20 * sets.max(1) {
        attempts += 1;
        let mut set = vec![false; n];
        match attempts % 3 {
            0 => {
                // slab × cap
                let i0 = rng.random_range(0..graph.bins);
                let width = rng.random_range(1..=graph.bins / 2);
                let c0 = rng.random_range(0..k);
                let rho = rng.random_range(0.1..PI);
                for i in i0..i0 + width {
                    for &(a, e) in &graph.near[c0] {
                        if a > rho {
                            break;
                        }
                        set[(i % graph.bins) * k + e] = true;
                    }
                }
            }
            _ => {
                // one or two balls
                for _ in 0..1 + attempts % 3 {
                    let mut seedset = vec![false; n];
                    seedset[rng.random_range(0..n)] = true;
                    let ball = graph.dilate(&seedset, rng.random_range(0.1..l / 4.0));
                    set.iter_mut().zip(ball).for_each(|(a, b)| *a |= b);
                }
            }
        }
        let a = graph.measure(&set);
        let nb = graph.measure(&graph.dilate(&set, eta));
        if nb > total / 2.0 || a == 0.0 {
            rep.skipped += 1;
            continue;
        }
        rep.tested += 1;
        let ratio = nb / ((1.0 + eta * h) * a);
        rep.min_ratio = rep.min_ratio.min(ratio);
        if ratio < 1.0 {
            rep.violations += 1;
        }
    }
    rep
}

// ---------------------------------------------------------------------------
// doubling and assembly

/// Where a cuff sits: a curve and an entry of that curve's atlas.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CuffRef {
    pub curve: u64,
    pub entry: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusPants {
    pub pants_id: u64,
    pub cuffs: [CuffRef; 3],
}

/// A copy `P^±` and one of its cuffs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Boundary {
    pub copy: usize,
    pub cuff: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceComponent {
    pub copies: Vec<usize>,
    pub euler: i64,
    pub genus: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurfaceAssembly {
    /// Node `2p + o` is pants `p` of the corpus with orientation `o`.
    pub copies: Vec<(u64, Orientation)>,
    pub gluings: Vec<(Boundary, Boundary)>,
    pub degrees: Vec<usize>,
    pub components: Vec<SurfaceComponent>,
    pub euler: i64,
    pub fixed_point_free: bool,
    pub involutive: bool,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// Doubling: `τ*(α⁺) = σ(α)⁻`, `τ*(α⁻) = σ⁻¹(α)⁺` on boundary labels, then
/// gluing every boundary circle to its `τ*`-image.
pub fn double_and_assemble(matchings: &BTreeMap<u64, Vec<usize>>, corpus: &[CorpusPants]) -> Result<SurfaceAssembly, MatchingError> {
    if corpus.is_empty() {
        return Err(MatchingError::Invalid("empty corpus".into()));
    }
    let labels = 3 * corpus.len();
    let mut owner: BTreeMap<CuffRef, usize> = BTreeMap::new();
    for (p, pants) in corpus.iter().enumerate() {
        for (k, c) in pants.cuffs.iter().enumerate() {
            if owner.insert(*c, 3 * p + k).is_some() {
                return Err(MatchingError::InvolutionClash(format!("curve {} entry {} claimed twice", c.curve, c.entry)));
            }
        }
    }
    // σ and σ⁻¹ on labels
    let mut sigma = vec![usize::MAX; labels];
    let mut sigma_inv = vec![usize::MAX; labels];
    for (p, pants) in corpus.iter().enumerate() {
        for (k, c) in pants.cuffs.iter().enumerate() {
            let unmatched = || MatchingError::UnmatchedBoundary { pants: pants.pants_id, cuff: k };
            let perm = matchings.get(&c.curve).ok_or_else(unmatched)?;
            let target = *perm.get(c.entry).ok_or_else(unmatched)?;
            let beta = *owner
                .get(&CuffRef { curve: c.curve, entry: target })
                .ok_or_else(unmatched)?;
            let alpha = 3 * p + k;
            if sigma_inv[beta] != usize::MAX {
                return Err(MatchingError::InvolutionClash(format!(
                    "curve {} entry {target} is the image of two entries",
                    c.curve
                )));
            }
            sigma[alpha] = beta;
            sigma_inv[beta] = alpha;
        }
    }
    // τ* on 2·labels: index 2α for α⁺, 2α + 1 for α⁻
    let tau_star: Vec<usize> = (0..2 * labels)
        .map(|x| {
            let a = x / 2;
            if x % 2 == 0 {
                2 * sigma[a] + 1
            } else {
                2 * sigma_inv[a]
            }
        })
        .collect();
    let fixed_point_free = tau_star.iter().enumerate().all(|(x, &y)| x != y);
    let involutive = tau_star.iter().enumerate().all(|(x, &y)| tau_star[y] == x);
    if !fixed_point_free || !involutive {
        return Err(MatchingError::InvolutionClash("τ* is not a fixed-point-free involution".into()));
    }
    let node = |x: usize| Boundary {
        copy: 2 * (x / 2 / 3) + x % 2,
        cuff: (x / 2) % 3,
    };
    let copies: Vec<(u64, Orientation)> = corpus
        .iter()
        .flat_map(|p| [(p.pants_id, Orientation::Plus), (p.pants_id, Orientation::Minus)])
        .collect();
    let mut gluings = Vec::new();
    let mut degrees = vec![0; copies.len()];
    let mut parent: Vec<usize> = (0..copies.len()).collect();
    for (x, &y) in tau_star.iter().enumerate() {
        if x < y {
            let (a, b) = (node(x), node(y));
            degrees[a.copy] += 1;
            degrees[b.copy] += 1;
            let (ra, rb) = (find(&mut parent, a.copy), find(&mut parent, b.copy));
            parent[ra] = rb;
            gluings.push((a, b));
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for c in 0..copies.len() {
        let r = find(&mut parent, c);
        groups.entry(r).or_default().push(c);
    }
    let components: Vec<SurfaceComponent> = groups
        .into_values()
        .map(|copies| {
            let euler = -(copies.len() as i64);
            SurfaceComponent {
                genus: 1 - euler / 2,
                euler,
                copies,
            }
        })
        .collect();
    Ok(SurfaceAssembly {
        euler: -(copies.len() as i64),
        copies,
        gluings,
        degrees,
        components,
        fixed_point_free,
        involutive,
    })
}

/// A matchable corpus: curves of even integer length with trivial holonomy
/// carry closed, jittered `τ`-orbits, and the cuffs of `pants` pants are
/// dealt randomly onto the orbit points.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub curves: BTreeMap<u64, FootAtlas>,
    pub pants: Vec<CorpusPants>,
}

pub fn orbit_corpus(n: usize, pants: usize, xi: f64, seed: u64) -> Result<SyntheticCorpus, MatchingError> {
    if n < 2 || pants == 0 || (3 * pants) % 2 == 1 {
        return Err(MatchingError::Invalid("need n ≥ 2 and an even number of cuffs".into()));
    }
    let mut rng = rng_for(seed, 0x6f63);
    let m = n - 1;
    let mut slots: Vec<(usize, usize)> = (0..pants).flat_map(|p| (0..3).map(move |k| (p, k))).collect();
    slots.shuffle(&mut rng);
    let orientation: Vec<Orientation> = (0..pants)
        .map(|_| if rng.random::<bool>() { Orientation::Plus } else { Orientation::Minus })
        .collect();
    let mut cuffs = vec![[CuffRef { curve: 0, entry: 0 }; 3]; pants];
    let mut curves = BTreeMap::new();
    let mut next = slots.into_iter();
    let mut remaining = 3 * pants;
    let mut curve = 0u64;
    while remaining > 0 {
        let options: Vec<usize> = [2usize, 4, 6].into_iter().filter(|&x| x <= remaining).collect();
        let len = *options.choose(&mut rng).expect("remaining is even");
        remaining -= len;
        let g = ModelClosedGeodesic::product(n, len as f64);
        let mut p = NormalFiberPoint {
            s: rng.random_range(0.0..g.length),
            w: random_unit(m, &mut rng),
        };
        let mut entries = Vec::with_capacity(len);
        for e in 0..len {
            let (pi, k) = next.next().expect("slot count");
            cuffs[pi][k] = CuffRef { curve, entry: e };
            let jitter = if m > 1 {
                let t = random_unit(m, &mut rng);
                let t = &t - &p.w * p.w.dot(&t);
                (&p.w + t * (0.2 * xi * rng.random::<f64>())).normalize()
            } else {
                p.w.clone()
            };
            let s = p.s + 0.2 * xi * (rng.random::<f64>() - 0.5);
            entries.push(AtlasEntry {
                pants_id: pi as u64,
                orientation: orientation[pi],
                foot: g.normalize(s, &jitter),
            });
            p = tau(&g, &p);
        }
        curves.insert(curve, FootAtlas::new(g, entries)?);
        curve += 1;
    }
    let pants = cuffs
        .into_iter()
        .enumerate()
        .map(|(p, cuffs)| CorpusPants { pants_id: p as u64, cuffs })
        .collect();
    Ok(SyntheticCorpus { curves, pants })
}

// ---------------------------------------------------------------------------
// well-matched pants

/// The feet one pants leaves on a shared cuff, in the cuff's model
/// coordinates, with the orientation it induces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuffSide {
    pub orientation: Orientation,
    pub average: Vec<NormalFiberPoint>,
    pub short: Vec<NormalFiberPoint>,
}

impl CuffSide {
    pub fn from_feet(orientation: Orientation, feet: &[FootPair]) -> Self {
        Self {
            orientation,
            average: feet.iter().map(|f| f.average.clone()).collect(),
            short: feet.iter().map(|f| f.short.clone()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WellMatchedReport {
    pub opposite: bool,
    /// `min d(τ(a₁), a₂)` with `τ` along the first pants' orientation.
    pub displacement: f64,
    pub well_matched: bool,
    /// `max d(a, n) · e^R` over both sides.
    pub k_measured: f64,
    /// `σ + 2Ke^{−R}`.
    pub sigma_prime: f64,
    /// Best oriented distance between short feet and its angle defect.
    pub oriented_distance: f64,
    pub angle: f64,
    pub well_attached: bool,
}

/// `τ` along orientation `o`: transport by `±1`, then antipodal.
pub fn tau_oriented(g: &ModelClosedGeodesic, o: Orientation, x: &NormalFiberPoint) -> NormalFiberPoint {
    g.normalize(x.s + o.sign(), &(-&x.w))
}

/// Well-matched test on average feet and the well-attached test on short
/// feet, with `σ′ = σ + 2Ke^{−R}` from the measured foot drift.
pub fn well_matched_check(g: &ModelClosedGeodesic, p1: &CuffSide, p2: &CuffSide, sigma: f64, r: f64) -> WellMatchedReport {
    let metric = Metric::new(g);
    let opposite = p1.orientation != p2.orientation;
    let o = p1.orientation;
    let mut displacement = f64::INFINITY;
    for a in &p1.average {
        let t = tau_oriented(g, o, &g.normalize(a.s, &a.w));
        for b in &p2.average {
            displacement = displacement.min(metric.dist(&t, &g.normalize(b.s, &b.w)));
        }
    }
    let k_measured = [p1, p2]
        .iter()
        .flat_map(|p| p.average.iter().zip(&p.short))
        .map(|(a, n)| metric.dist(&g.normalize(a.s, &a.w), &g.normalize(n.s, &n.w)))
        .fold(0.0, f64::max)
        * r.exp();
    let sigma_prime = sigma + 2.0 * k_measured * (-r).exp();
    let (mut best_dist, mut best_angle, mut best_score) = (f64::NAN, f64::NAN, f64::INFINITY);
    for x in &p1.short {
        for y in &p2.short {
            let (x, y) = (g.normalize(x.s, &x.w), g.normalize(y.s, &y.w));
            let dist = ((y.s - x.s) * o.sign()).rem_euclid(g.length);
            let to = x.s + o.sign() * dist;
            let moved = parallel_transport(g, x.s, to, &(-&x.w));
            let angle = sphere_distance(&moved, &y.w);
            let score = (dist - 1.0).abs().max(angle);
            if score < best_score {
                (best_dist, best_angle, best_score) = (dist, angle, score);
            }
        }
    }
    WellMatchedReport {
        opposite,
        displacement,
        well_matched: opposite && displacement < sigma,
        k_measured,
        sigma_prime,
        oriented_distance: best_dist,
        angle: best_angle,
        well_attached: opposite && (best_dist - 1.0).abs() <= sigma_prime && best_angle <= sigma_prime,
    }
}
