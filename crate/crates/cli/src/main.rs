//! `pants`: runs the checks of the workbench and writes reports.
//!
//! Every command writes `<out-dir>/<command>/report.json` plus its data files.
//! Exit status: 0 when all checks pass (or a violation was expected), 1 on a
//! violation, 2 on errors.

mod config;
mod report;
mod svg;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use pants_core::foot::{
    diamond_area, diamond_area_mc, estimated_measure, hat_diamond_area, sample_good_region, DensityEstimate, FiberConfig, FootGrid,
    GoodRegionSpec,
};
use pants_core::geometry::{fermat_point, hdistance, FermatKind, ModelClosedGeodesic};
use pants_core::lorentz::so::{haar_so, plane_rotation, random_lorentz_near_identity, random_unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use pants_core::lorentz::{b_element, boost, flow, m_element, nan_by_elimination, nan_decompose, so_distance};
use pants_core::matching::*;
use pants_core::pants::{build_bad_pants, build_perfect_pants, classify, perturb_pants, ClassifyConfig, Verdict};
use pants_core::steiner::{convexity_probe, steiner_minimize, PantsPresentation, SteinerConfig};
use pants_core::word::{absorb_perturbation, axis_invariants, close_eight_word, WordConfig};
use pants_core::{GroupElement, HPoint, Mat};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use config::{CommonArgs, RunConfig};
use report::{OutDir, Outcome, Provenance, Report};
use svg::Role;

#[derive(Parser)]
#[command(name = "pants", version, about = "Good pants, foot measures and Hall matching: checks and reports")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Randomised check of one numerical lemma.
    VerifyLemma {
        #[arg(long, value_enum)]
        lemma: Lemma,
        #[arg(long, default_value_t = 1000)]
        cases: usize,
    },
    /// Steiner graph of a perfect or bad pants, optionally perturbed.
    Steiner {
        #[arg(long, value_enum, default_value = "perfect")]
        kind: Kind,
        /// Perturbation size of the connections.
        #[arg(long, default_value_t = 0.0)]
        perturb: f64,
        #[arg(long, default_value_t = 100)]
        convexity: usize,
    },
    /// Good/bad classification of a pants corpus.
    ClassifyPants {
        /// JSONL file, one pants presentation per line.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Generate perturbed pants instead, e.g. `good:500,bad:500`.
        #[arg(long)]
        generate: Option<String>,
        /// Perturbation of generated pants (default eps/4).
        #[arg(long)]
        perturb: Option<f64>,
        /// Re-framings per pants for the gauge check.
        #[arg(long, default_value_t = 20)]
        gauges: u64,
    },
    /// Density of the estimated average foot measure on a fiber grid.
    FootMeasure {
        /// Repeat on a grid with twice the sphere cells.
        #[arg(long)]
        refine: bool,
        /// Points drawn from the good region to report the acceptance rate.
        #[arg(long, default_value_t = 200)]
        region_samples: usize,
    },
    /// Matching of a foot atlas against its τ-image.
    Match {
        /// Atlas JSONL (optional `{"gamma0": ..}` header, then entries).
        #[arg(long)]
        atlas: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "quasi-uniform")]
        mode: Mode,
        /// Majority:minority split for the obstruction modes.
        #[arg(long, default_value = "3:1")]
        imbalance: String,
        #[arg(long, default_value_t = 0.1)]
        radius: f64,
        #[arg(long, default_value_t = PI / 4.0)]
        colatitude: f64,
        #[arg(long, default_value_t = 0.05)]
        half_width: f64,
        /// Random cap unions in the Hall test family.
        #[arg(long, default_value_t = 50)]
        unions: usize,
        /// Also bound the Cheeger constant of the unit normal bundle.
        #[arg(long)]
        cheeger: bool,
    },
    /// Per-curve matchings, doubling and the closed surface they glue to.
    Assemble {
        /// Corpus JSONL: curve atlases and pants records.
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Generate a corpus with this many pants instead.
        #[arg(long)]
        pants: Option<usize>,
    },
    /// Summary of every report under the output directory.
    Report,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Lemma {
    Nan,
    Absorb,
    EightWord,
    Fermat,
    Diamond,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Kind {
    Perfect,
    Bad,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Mode {
    QuasiUniform,
    Icecap,
    Bands,
}

/// Raised when a command has nothing to work on.
#[derive(Debug)]
struct NoInput(String);

impl std::fmt::Display for NoInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "no input: {}", self.0)
    }
}

impl std::error::Error for NoInput {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = cli.common.resolve()?;
    let name = match &cli.command {
        Command::VerifyLemma { .. } => "verify-lemma",
        Command::Steiner { .. } => "steiner",
        Command::ClassifyPants { .. } => "classify-pants",
        Command::FootMeasure { .. } => "foot-measure",
        Command::Match { .. } => "match",
        Command::Assemble { .. } => "assemble",
        Command::Report => return summary(&cfg),
    };
    let mut out = OutDir::create(&cfg.out_dir, name)?;
    let mut rep = Report::new(name, &cfg);
    let start = Instant::now();
    match &cli.command {
        Command::VerifyLemma { lemma, cases } => verify_lemma(&cfg, *lemma, *cases, &mut rep)?,
        Command::Steiner { kind, perturb, convexity } => steiner(&cfg, *kind, *perturb, *convexity, &mut rep)?,
        Command::ClassifyPants { corpus, generate, perturb, gauges } => {
            classify_pants(&cfg, corpus.as_deref(), generate.as_deref(), *perturb, *gauges, &mut rep, &mut out)?
        }
        Command::FootMeasure { refine, region_samples } => foot_measure(&cfg, *refine, *region_samples, &mut rep, &mut out)?,
        Command::Match { atlas, mode, imbalance, radius, colatitude, half_width, unions, cheeger } => {
            let synth = Synthesis { mode: *mode, imbalance: parse_imbalance(imbalance)?, radius: *radius, colatitude: *colatitude, half_width: *half_width };
            match_atlas(&cfg, atlas.as_deref(), &synth, *unions, *cheeger, &mut rep, &mut out)?
        }
        Command::Assemble { corpus, pants } => assemble(&cfg, corpus.as_deref(), *pants, &mut rep, &mut out)?,
        Command::Report => unreachable!(),
    }
    if cli.common.timings {
        rep.timings_ms = Some(BTreeMap::from([("total".to_string(), start.elapsed().as_secs_f64() * 1e3)]));
    }
    rep.settle(cli.common.expect_violation);
    let rep = out.finish(rep)?;
    let failed: Vec<&str> = rep.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
    println!(
        "{name}: {} ({} checks, {} failed{}) -> {}",
        serde_json::to_value(rep.outcome)?.as_str().unwrap_or_default(),
        rep.checks.len(),
        failed.len(),
        if failed.is_empty() { String::new() } else { format!(": {}", failed.join(", ")) },
        out_path(&cfg, name).display()
    );
    Ok(rep.outcome)
}

fn out_path(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name).join("report.json")
}

fn parse_imbalance(s: &str) -> anyhow::Result<(u32, u32)> {
    let (a, b) = s.split_once(':').ok_or_else(|| anyhow!("imbalance {s:?} is not of the form a:b"))?;
    Ok((a.trim().parse().context("imbalance")?, b.trim().parse().context("imbalance")?))
}

/// Closed geodesic of length `2R` with monodromy a rotation by `ε/2`.
fn model_curve(cfg: &RunConfig) -> ModelClosedGeodesic {
    let m = cfg.n - 1;
    let lam = if m >= 2 { plane_rotation(m, 0, 1, cfg.eps / 2.0) } else { Mat::identity(m, m) };
    ModelClosedGeodesic::new(2.0 * cfg.r, lam).expect("valid curve")
}

fn region_spec(cfg: &RunConfig) -> anyhow::Result<GoodRegionSpec> {
    Ok(GoodRegionSpec::new(cfg.r, cfg.eps, cfg.delta(), model_curve(cfg))?)
}

// ---------------------------------------------------------------------------
// verify-lemma

fn small(n: usize, scale: f64, r: &mut ChaCha8Rng) -> GroupElement {
    GroupElement::from_matrix_unchecked(random_lorentz_near_identity(n, scale, r))
}

/// Triangle angle at `a` from the hyperbolic law of cosines.
fn angle_at(a: &HPoint, b: &HPoint, c: &HPoint) -> f64 {
    let (x, y, z) = (hdistance(a, b), hdistance(a, c), hdistance(b, c));
    ((x.cosh() * y.cosh() - z.cosh()) / (x.sinh() * y.sinh())).clamp(-1.0, 1.0).acos()
}

fn verify_lemma(cfg: &RunConfig, lemma: Lemma, cases: usize, rep: &mut Report) -> anyhow::Result<()> {
    let pol = cfg.policy();
    let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
    let wcfg = WordConfig::default();
    let mut fails = 0usize;
    match lemma {
        Lemma::Nan => {
            let (mut resid, mut uniq) = (0.0f64, 0.0f64);
            for _ in 0..cases {
                let n = r.random_range(2..=8);
                let u = small(n, r.random_range(0.0..0.05), &mut r);
                match (nan_decompose(&u, &pol), nan_by_elimination(&u)) {
                    (Ok(f), Some((np, b, nm))) => {
                        let back = &(&f.nplus * &f.b) * &f.nminus;
                        resid = resid.max((back.mat() - u.mat()).abs().max());
                        for (x, y) in [(&np, &f.nplus), (&b, &f.b), (&nm, &f.nminus)] {
                            uniq = uniq.max((x.mat() - y.mat()).abs().max());
                        }
                    }
                    _ => fails += 1,
                }
            }
            rep.check("round trip", resid < 1e-10, format!("max residual {resid:.2e} < 1e-10"));
            rep.check("uniqueness", uniq < 1e-8, format!("Newton vs elimination {uniq:.2e} < 1e-8"));
            rep.constant("nan_residual", resid, Provenance::Measured);
        }
        Lemma::Absorb | Lemma::EightWord => {
            let (mut len_err, mut k_t, mut k_m) = (0.0f64, 0.0f64, 0.0f64);
            for _ in 0..cases {
                let n = r.random_range(3..6);
                let eps = 10f64.powf(r.random_range(-4.0..-2.0));
                let t1 = r.random_range(8.0..15.0);
                let t2 = r.random_range(8.0..15.0);
                let (m1, m2) = (haar_so(n - 1, &mut r), haar_so(n - 1, &mut r));
                let res = if matches!(lemma, Lemma::Absorb) {
                    let u = small(n, eps, &mut r);
                    let g = &b_element(t1, &m1) * &u;
                    absorb_perturbation(t1, &m1, &u, &wcfg, &pol).ok().zip(axis_invariants(&g, &pol).ok()).map(|(a, s)| (a, s, t1, m1.clone()))
                } else {
                    let gs: Vec<GroupElement> = (0..4).map(|_| small(n, eps, &mut r)).collect();
                    let word = [flow(n, t1), gs[0].clone(), m_element(&m1, 1e-9)?, gs[1].clone(), flow(n, t2), gs[2].clone(), m_element(&m2, 1e-9)?, gs[3].clone()];
                    let g = word.iter().skip(1).fold(word[0].clone(), |acc, x| &acc * x);
                    close_eight_word(t1, &gs[0], &m1, &gs[1], t2, &gs[2], &m2, &gs[3], &wcfg, &pol)
                        .ok()
                        .zip(axis_invariants(&g, &pol).ok())
                        .map(|(a, s)| (a, s, t1 + t2, &m1 * &m2))
                };
                match res {
                    Some((a, s, t, m)) => {
                        len_err = len_err.max((a.t - s.t).abs());
                        k_t = k_t.max((a.t - t).abs() / eps);
                        k_m = k_m.max(so_distance(&a.m, &m) / eps);
                    }
                    None => fails += 1,
                }
            }
            rep.check("spectral length", len_err < 1e-9, format!("max |t - t_spectral| {len_err:.2e} < 1e-9"));
            rep.check("length constant", k_t < 10.0, format!("K = max |t - t'|/eps = {k_t:.3}"));
            rep.check("monodromy constant", k_m < 10.0, format!("max d(m, m')/eps = {k_m:.3}"));
            rep.constant("K", k_t, Provenance::Measured);
            rep.constant("C_monodromy", k_m, Provenance::Measured);
        }
        Lemma::Fermat => {
            let (mut interior, mut vertex, mut worst) = (0usize, 0usize, 0.0f64);
            for _ in 0..cases {
                let n = r.random_range(2..5);
                let t: Vec<HPoint> = (0..3)
                    .map(|_| {
                        let d = random_unit(n, &mut r);
                        boost(&d, r.random_range(0.2..3.0)).base_point()
                    })
                    .collect();
                let angles = [angle_at(&t[0], &t[1], &t[2]), angle_at(&t[1], &t[2], &t[0]), angle_at(&t[2], &t[0], &t[1])];
                let wide = angles.iter().position(|&a| a >= 2.0 * PI / 3.0);
                match (fermat_point(&t[0], &t[1], &t[2]), wide) {
                    (Ok(f), None) if f.kind == FermatKind::Interior => {
                        interior += 1;
                        worst = f.angles.iter().map(|a| (a - 2.0 * PI / 3.0).abs()).fold(worst, f64::max);
                    }
                    (Ok(f), Some(w)) if f.kind == FermatKind::Vertex(w) => vertex += 1,
                    _ => fails += 1,
                }
            }
            rep.check("angles", worst < 1e-6, format!("{interior} interior points, max |angle - 2pi/3| {worst:.2e}"));
            rep.constant("vertex_cases", vertex as f64, Provenance::Measured);
        }
        Lemma::Diamond => {
            let mut worst = 0.0f64;
            for i in 0..cases {
                let hat = i % 2 == 1;
                let eps = r.random_range(0.01..=cfg.eps.max(0.011));
                let l0 = 2.0 * cfg.r + r.random_range(-eps..eps);
                let exact = if hat { hat_diamond_area(cfg.r, eps, l0) } else { diamond_area(cfg.r, eps, l0) };
                let mc = diamond_area_mc(cfg.r, eps, l0, hat, cfg.samples, r.random());
                worst = worst.max((mc.value - exact).abs() / mc.stderr);
            }
            // area ~ 128 e^{4R - l0} eps^2 as eps -> 0
            let (e, l0) = (1e-4, 2.0 * cfg.r);
            let lim = diamond_area(cfg.r, e, l0) / (e * e) / (128.0 * (4.0 * cfg.r - l0).exp()) - 1.0;
            rep.check("monte carlo", worst < 3.5, format!("max deviation {worst:.2} stderr over {cases} diamonds"));
            rep.check("small eps limit", lim.abs() < 1e-3, format!("relative error {lim:.2e} at eps = 1e-4"));
        }
    }
    rep.check("no failures", fails == 0, format!("{fails} of {cases} cases failed to run"));
    rep.data = json!({ "lemma": lemma, "cases": cases });
    Ok(())
}

// ---------------------------------------------------------------------------
// steiner

fn steiner(cfg: &RunConfig, kind: Kind, perturb: f64, convexity: usize, rep: &mut Report) -> anyhow::Result<()> {
    let base = match kind {
        Kind::Perfect => build_perfect_pants(cfg.n, cfg.r)?,
        Kind::Bad => build_bad_pants(cfg.n, cfg.r)?,
    };
    let p = perturb_pants(&base, perturb, cfg.seed);
    let scfg = SteinerConfig::default();
    let sg = match steiner_minimize(&p, &scfg) {
        Ok(sg) => sg,
        Err(e) => {
            rep.check("nondegenerate", false, e.to_string());
            rep.data = json!({ "kind": kind, "perturb": perturb });
            return Ok(());
        }
    };
    let dev = sg.angles_x.iter().chain(&sg.angles_y).map(|a| (a - 2.0 * PI / 3.0).abs()).fold(0.0, f64::max);
    rep.check("nondegenerate", true, format!("shortest edge {:.4}", sg.lengths.iter().cloned().fold(f64::INFINITY, f64::min)));
    rep.check("angles", dev < 1e-6, format!("max |angle - 2pi/3| {dev:.2e}"));
    rep.check("gradient", sg.gradient_norm < scfg.gradient_tol, format!("{:.2e}", sg.gradient_norm));
    rep.check("hessian", sg.hessian_min_eig > 0.0, format!("smallest eigenvalue {:.3e}", sg.hessian_min_eig));
    if convexity > 0 {
        let c = convexity_probe(&p, (&sg.x_point(), &sg.y_point()), 1.0, convexity, cfg.seed);
        rep.check("convexity", c.strict == c.trials, format!("{}/{} strict, min margin {:.3e}", c.strict, c.trials, c.min_margin));
    }
    rep.constant("total_length", sg.total, Provenance::Measured);
    rep.data = json!({ "kind": kind, "perturb": perturb, "graph": sg });
    Ok(())
}

// ---------------------------------------------------------------------------
// classify-pants

#[derive(Serialize)]
struct VerdictRow {
    index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    expected: Option<&'static str>,
    verdict: &'static str,
    certificate: Option<f64>,
    gauge_agree: bool,
}

fn read_lines(path: &Path) -> anyhow::Result<Vec<Value>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{}:{}", path.display(), i + 1)))
        .collect()
}

fn classify_pants(
    cfg: &RunConfig,
    corpus: Option<&Path>,
    generate: Option<&str>,
    perturb: Option<f64>,
    gauges: u64,
    rep: &mut Report,
    out: &mut OutDir,
) -> anyhow::Result<()> {
    let mut items: Vec<(Option<&'static str>, PantsPresentation)> = Vec::new();
    if let Some(path) = corpus {
        for v in read_lines(path)? {
            items.push((None, serde_json::from_value(v)?));
        }
    }
    if let Some(spec) = generate {
        let scale = perturb.unwrap_or(cfg.eps / 4.0);
        for part in spec.split(',').filter(|s| !s.is_empty()) {
            let (kind, count) = part.split_once(':').ok_or_else(|| anyhow!("generate entry {part:?} is not kind:count"))?;
            let count: usize = count.parse().context("generate count")?;
            let (label, base) = match kind {
                "good" => ("good", build_perfect_pants(cfg.n, cfg.r)?),
                "bad" => ("bad", build_bad_pants(cfg.n, cfg.r)?),
                _ => bail!("unknown pants kind {kind:?} (expected good or bad)"),
            };
            for i in 0..count {
                let seed = cfg.seed.wrapping_mul(1_000_003).wrapping_add((items.len() + i) as u64);
                items.push((Some(label), perturb_pants(&base, scale, seed)));
            }
        }
        out.write_jsonl("corpus.jsonl", items.iter().map(|(_, p)| p))?;
    }
    if items.is_empty() {
        return Err(NoInput("the pants corpus is empty".into()).into());
    }
    let mut rows = Vec::with_capacity(items.len());
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let (mut mismatched, mut unresolved, mut gauge_breaks) = (0, 0, 0);
    for (index, (expected, p)) in items.iter().enumerate() {
        let c = classify(p, cfg.r, cfg.eps, &ClassifyConfig::default())?;
        let verdict = c.verdict.label();
        let certificate = match &c.verdict {
            Verdict::Good(x) | Verdict::Bad(x) => Some(x.value),
            _ => None,
        };
        let mut gauge_agree = true;
        for g in 0..gauges {
            let gc = ClassifyConfig { gauge_seed: Some(g), ..ClassifyConfig::default() };
            if classify(p, cfg.r, cfg.eps, &gc)?.verdict.label() != verdict {
                gauge_agree = false;
            }
        }
        gauge_breaks += usize::from(!gauge_agree);
        unresolved += usize::from(verdict == "unresolved");
        if expected.is_some_and(|e| e != verdict) {
            mismatched += 1;
        }
        *counts.entry(verdict.to_string()).or_default() += 1;
        rows.push(VerdictRow { index, expected: *expected, verdict, certificate, gauge_agree });
    }
    out.write_jsonl("verdicts.jsonl", &rows)?;
    rep.check("resolved", unresolved == 0, format!("{unresolved} unresolved of {}", items.len()));
    rep.check("gauge invariant", gauge_breaks == 0, format!("{gauge_breaks} pants change verdict over {gauges} re-framings"));
    if items.iter().any(|(e, _)| e.is_some()) {
        rep.check("expected verdicts", mismatched == 0, format!("{mismatched} generated pants classified against their construction"));
    }
    rep.data = json!({ "pants": items.len(), "verdicts": counts });
    Ok(())
}

// ---------------------------------------------------------------------------
// foot-measure

fn density_csv(est: &DensityEstimate) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let m = est.points.first().map_or(0, |p| p.w.len());
    let mut header = vec!["s".to_string()];
    header.extend((0..m).map(|i| format!("w{i}")));
    header.extend(["density".into(), "stderr".into()]);
    w.write_record(&header)?;
    for ((p, v), e) in est.points.iter().zip(&est.values).zip(&est.stderrs) {
        let mut row = vec![p.s.to_string()];
        row.extend(p.w.iter().map(|x| x.to_string()));
        row.extend([v.to_string(), e.to_string()]);
        w.write_record(&row)?;
    }
    Ok(w.into_inner()?)
}

fn density(cfg: &RunConfig, cells: usize) -> anyhow::Result<DensityEstimate> {
    let spec = region_spec(cfg)?;
    let fc = FiberConfig { samples: cfg.samples, seed: cfg.seed, ..FiberConfig::default() };
    Ok(estimated_measure(&spec, &FootGrid { s_bins: cfg.s_bins, sphere_cells: cells }, &fc))
}

fn foot_measure(cfg: &RunConfig, refine: bool, region_samples: usize, rep: &mut Report, out: &mut OutDir) -> anyhow::Result<()> {
    if cfg.n < 3 {
        bail!("foot-measure needs n >= 3 (the fiber sphere of n = 2 is two points)");
    }
    let est = density(cfg, cfg.cells)?;
    out.write("density.csv", &density_csv(&est)?)?;
    rep.check("quasi-uniform", est.ratio.is_finite() && est.ratio > 0.0, format!("max/min density {:.4}", est.ratio));
    rep.check("tau invariant", est.tau_residual < 4.5, format!("max |d(tau v) - d(v)| = {:.2} stderr", est.tau_residual));
    rep.check("holonomy invariant", est.holonomy_residual < 4.5, format!("max |d(s, Lw) - d(s, w)| = {:.2} stderr", est.holonomy_residual));
    rep.constant("density_ratio", est.ratio, Provenance::Measured);
    rep.constant("B0", est.b0, Provenance::Measured);
    rep.constant("total_mass", est.total_mass, Provenance::Measured);
    let mut refined = Value::Null;
    if refine {
        let fine = density(cfg, 2 * cfg.cells)?;
        let change = fine.ratio / est.ratio - 1.0;
        rep.check("mesh stable", change.abs() <= 0.1, format!("ratio {:.4} -> {:.4} ({:+.1}%)", est.ratio, fine.ratio, 100.0 * change));
        out.write("density_refined.csv", &density_csv(&fine)?)?;
        refined = json!({ "cells": 2 * cfg.cells, "ratio": fine.ratio, "total_mass": fine.total_mass });
    }
    if region_samples > 0 {
        let s = sample_good_region(&region_spec(cfg)?, region_samples, cfg.seed)?;
        rep.constant("acceptance_rate", s.acceptance, Provenance::Measured);
    }
    rep.data = json!({
        "grid": est.grid,
        "total_mass": est.total_mass,
        "total_stderr": est.total_stderr,
        "ratio": est.ratio,
        "tau_residual": est.tau_residual,
        "holonomy_residual": est.holonomy_residual,
        "refined": refined,
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// match

struct Synthesis {
    mode: Mode,
    imbalance: (u32, u32),
    radius: f64,
    colatitude: f64,
    half_width: f64,
}

#[derive(Serialize, Deserialize)]
struct AtlasHeader {
    gamma0: ModelClosedGeodesic,
}

fn read_atlas(path: &Path, fallback: ModelClosedGeodesic) -> anyhow::Result<FootAtlas> {
    let mut gamma0 = fallback;
    let mut entries = Vec::new();
    for v in read_lines(path)? {
        if v.get("gamma0").is_some() {
            gamma0 = serde_json::from_value::<AtlasHeader>(v)?.gamma0;
        } else {
            entries.push(serde_json::from_value::<AtlasEntry>(v)?);
        }
    }
    if entries.is_empty() {
        return Err(NoInput(format!("{} has no atlas entries", path.display())).into());
    }
    Ok(FootAtlas::new(gamma0, entries)?)
}

fn atlas_lines(atlas: &FootAtlas) -> anyhow::Result<Vec<Value>> {
    let mut rows = vec![serde_json::to_value(AtlasHeader { gamma0: atlas.gamma0.clone() })?];
    for e in &atlas.entries {
        rows.push(serde_json::to_value(e)?);
    }
    Ok(rows)
}

fn match_atlas(cfg: &RunConfig, path: Option<&Path>, syn: &Synthesis, unions: usize, cheeger: bool, rep: &mut Report, out: &mut OutDir) -> anyhow::Result<()> {
    let xi = cfg.xi();
    let curve = model_curve(cfg);
    let atlas = match path {
        Some(p) => read_atlas(p, curve)?,
        None => {
            if cfg.count == 0 {
                return Err(NoInput("count is 0".into()).into());
            }
            let mode = match syn.mode {
                Mode::QuasiUniform => AtlasMode::QuasiUniform(density(cfg, cfg.cells)?),
                Mode::Icecap => AtlasMode::IceCap { imbalance: syn.imbalance, radius: syn.radius },
                Mode::Bands => AtlasMode::Bands { colatitude: syn.colatitude, half_width: syn.half_width, imbalance: syn.imbalance },
            };
            synthesize_atlas(&curve, &mode, cfg.count, cfg.seed)?
        }
    };
    out.write_jsonl("atlas.jsonl", atlas_lines(&atlas)?)?;
    let result = find_matching(&atlas, xi);
    let family = standard_family(&atlas.gamma0, unions, cfg.seed);
    let hall = hall_check(&atlas, xi, &family);
    let mut roles = vec![Role::Plain; atlas.len()];
    match &result {
        MatchingResult::Perfect { sigma, max_displacement } => {
            if !verify_sigma(&atlas, xi, sigma) {
                bail!("internal error: matching does not verify");
            }
            rep.check("perfect matching", true, format!("max displacement {max_displacement:.4e} < xi = {xi}"));
            rep.constant("max_displacement", *max_displacement, Provenance::Measured);
        }
        MatchingResult::HallViolation { certificate, matched } => {
            if !verify_certificate(&atlas, xi, certificate) || hall.exact_deficiency != certificate.deficiency {
                bail!("internal error: Hall certificate does not verify");
            }
            for &t in &certificate.targets {
                roles[t] = Role::Target;
            }
            for &p in &certificate.preimages {
                roles[p] = Role::Preimage;
            }
            rep.check(
                "perfect matching",
                false,
                format!(
                    "Hall violation: {} targets, {} preimages (recounted), deficiency {}, matched {matched}/{}",
                    certificate.targets.len(),
                    recount_preimages(&atlas, xi, &certificate.targets),
                    certificate.deficiency,
                    atlas.len()
                ),
            );
        }
    }
    rep.check("test family agrees", hall.agree, format!("family min margin {}, exact deficiency {}", hall.family_min_margin, hall.exact_deficiency));
    rep.constant("xi", xi, Provenance::Input);
    rep.constant("bottleneck_xi", bottleneck_xi(&atlas), Provenance::Measured);
    let title = format!("{} feet on a curve of length {:.3}, xi = {xi}", atlas.len(), atlas.gamma0.length);
    out.write("feet.svg", svg::fiber_plot(&atlas, &roles, &title).as_bytes())?;
    let mut matching = serde_json::to_vec_pretty(&json!({ "xi": xi, "result": result }))?;
    matching.push(b'\n');
    out.write("matching.json", &matching)?;
    let mut cheeger_data = Value::Null;
    if cheeger {
        let c = cheeger_bundle_bound(&atlas.gamma0, cfg.r, &CheegerMesh::default(), 100, 0.3)?;
        rep.check("cheeger bound", c.bound_holds, format!("estimate {:.4} vs 1/(4R) = {:.4}", c.estimate, c.bound));
        rep.check("neighbourhood growth", c.growth.violations == 0, format!("{} of {} sets violate", c.growth.violations, c.growth.tested));
        rep.constant("cheeger_estimate", c.estimate, Provenance::Measured);
        cheeger_data = serde_json::to_value(&c)?;
    }
    rep.data = json!({
        "mode": match path { Some(_) => Value::from("file"), None => serde_json::to_value(syn.mode)? },
        "feet": atlas.len(),
        "tau_edges": TauGraph::build(&atlas, xi).edge_count(),
        "hall": hall,
        "cheeger": cheeger_data,
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// assemble

#[derive(Serialize, Deserialize)]
struct CurveRecord {
    curve: u64,
    #[serde(flatten)]
    atlas: FootAtlas,
}

fn read_corpus(path: &Path) -> anyhow::Result<SyntheticCorpus> {
    let mut c = SyntheticCorpus { curves: BTreeMap::new(), pants: Vec::new() };
    for v in read_lines(path)? {
        if v.get("curve").is_some() {
            let r: CurveRecord = serde_json::from_value(v)?;
            let atlas = FootAtlas::new(r.atlas.gamma0, r.atlas.entries)?;
            c.curves.insert(r.curve, atlas);
        } else {
            c.pants.push(serde_json::from_value(v)?);
        }
    }
    Ok(c)
}

fn assemble(cfg: &RunConfig, path: Option<&Path>, pants: Option<usize>, rep: &mut Report, out: &mut OutDir) -> anyhow::Result<()> {
    let xi = cfg.xi();
    let corpus = match (path, pants) {
        (Some(p), _) => read_corpus(p)?,
        (None, Some(k)) if k > 0 => orbit_corpus(cfg.n, k, xi, cfg.seed)?,
        _ => SyntheticCorpus { curves: BTreeMap::new(), pants: Vec::new() },
    };
    if corpus.pants.is_empty() {
        return Err(NoInput("the corpus has no pants".into()).into());
    }
    let mut rows: Vec<Value> = Vec::new();
    for (id, atlas) in &corpus.curves {
        rows.push(serde_json::to_value(CurveRecord { curve: *id, atlas: atlas.clone() })?);
    }
    for p in &corpus.pants {
        rows.push(serde_json::to_value(p)?);
    }
    out.write_jsonl("corpus.jsonl", rows)?;
    let mut matchings = BTreeMap::new();
    let mut unmatched = Vec::new();
    for (id, atlas) in &corpus.curves {
        match find_matching(atlas, xi) {
            MatchingResult::Perfect { sigma, .. } => {
                matchings.insert(*id, sigma);
            }
            MatchingResult::HallViolation { certificate, .. } => unmatched.push(json!({ "curve": id, "deficiency": certificate.deficiency })),
        }
    }
    rep.check("curves matched", unmatched.is_empty(), format!("{} of {} curves without a perfect matching", unmatched.len(), corpus.curves.len()));
    if !unmatched.is_empty() {
        rep.data = json!({ "pants": corpus.pants.len(), "unmatched": unmatched });
        return Ok(());
    }
    let s = double_and_assemble(&matchings, &corpus.pants)?;
    let copies = s.copies.len() as i64;
    rep.check("involution", s.fixed_point_free && s.involutive, format!("fixed-point-free {}, involutive {}", s.fixed_point_free, s.involutive));
    rep.check("trivalent", s.degrees.iter().all(|&d| d == 3), "every oriented copy is glued along three cuffs");
    rep.check("euler characteristic", s.euler == -copies, format!("chi = {} for {copies} oriented copies", s.euler));
    rep.constant("euler", s.euler as f64, Provenance::Measured);
    let mut assembly = serde_json::to_vec_pretty(&s)?;
    assembly.push(b'\n');
    out.write("assembly.json", &assembly)?;
    rep.data = json!({
        "pants": corpus.pants.len(),
        "curves": corpus.curves.len(),
        "copies": copies,
        "euler": s.euler,
        "components": s.components.iter().map(|c| json!({ "copies": c.copies.len(), "euler": c.euler, "genus": c.genus })).collect::<Vec<_>>(),
    });
    Ok(())
}

// ---------------------------------------------------------------------------
// report

fn summary(cfg: &RunConfig) -> anyhow::Result<Outcome> {
    let mut entries = Vec::new();
    let mut dirs: Vec<PathBuf> = match fs::read_dir(&cfg.out_dir) {
        Ok(rd) => rd.flatten().map(|e| e.path()).filter(|p| p.join("report.json").is_file()).collect(),
        Err(_) => Vec::new(),
    };
    dirs.sort();
    let mut worst = Outcome::Pass;
    for d in &dirs {
        let text = fs::read_to_string(d.join("report.json"))?;
        let r: Report = serde_json::from_str(&text).with_context(|| format!("parsing {}", d.join("report.json").display()))?;
        if r.schema_version != report::SCHEMA_VERSION {
            bail!("{}: schema version {} (expected {})", d.display(), r.schema_version, report::SCHEMA_VERSION);
        }
        if r.outcome == Outcome::Violation {
            worst = Outcome::Violation;
        }
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        entries.push(json!({
            "command": r.command,
            "outcome": r.outcome,
            "checks": r.checks.len(),
            "failed": failed,
            "code_version": r.code_version,
            "constants": r.constants,
        }));
    }
    if entries.is_empty() {
        return Err(NoInput(format!("no reports under {}", cfg.out_dir.display())).into());
    }
    let doc = json!({
        "schema_version": report::SCHEMA_VERSION,
        "code_version": report::code_version(),
        "outcome": worst,
        "reports": entries,
    });
    let mut text = serde_json::to_vec_pretty(&doc)?;
    text.push(b'\n');
    let p = cfg.out_dir.join("summary.json");
    fs::write(&p, text)?;
    println!("report: {} reports, outcome {} -> {}", dirs.len(), serde_json::to_value(worst)?.as_str().unwrap_or_default(), p.display());
    Ok(worst)
}
