use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

/// Everything that determines a run. The output directory is not part of
/// the embedded copy, so moving a run does not change its reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    #[serde(rename = "R")]
    pub r: f64,
    pub eps: f64,
    /// Defaults to `eps`.
    pub delta: Option<f64>,
    /// Defaults to `R⁻²`.
    pub xi: Option<f64>,
    pub seed: u64,
    /// Monte Carlo samples per density cell.
    pub samples: usize,
    /// Sphere cells of the fiber grid.
    pub cells: usize,
    pub s_bins: usize,
    /// Feet, pants or test cases, depending on the command.
    pub count: usize,
    /// Numeric policy: "f64" or "f32".
    pub tolerance: String,
    #[serde(skip)]
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 4,
            r: 10.0,
            eps: 0.1,
            delta: None,
            xi: None,
            seed: 0,
            samples: 20_000,
            cells: 32,
            s_bins: 1,
            count: 200,
            tolerance: "f64".into(),
            out_dir: PathBuf::from("pants-out"),
        }
    }
}

#[derive(Debug, PartialEq)]
pub struct FieldError {
    pub field: &'static str,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug)]
pub struct ConfigError(pub Vec<FieldError>);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for e in &self.0 {
            write!(f, "\n  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(self.eps)
    }

    pub fn xi(&self) -> f64 {
        self.xi.unwrap_or(1.0 / (self.r * self.r))
    }

    pub fn policy(&self) -> pants_core::NumericPolicy {
        if self.tolerance == "f32" {
            pants_core::NumericPolicy::F32
        } else {
            pants_core::NumericPolicy::F64
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut errs = Vec::new();
        let mut bad = |field, message: String| errs.push(FieldError { field, message });
        if !(2..=8).contains(&self.n) {
            bad("n", format!("{} is outside [2, 8]", self.n));
        }
        if !(self.r >= 4.0 && self.r <= 20.0) {
            bad("R", format!("{} is outside [4, 20]", self.r));
        }
        if !(self.eps > 0.0 && self.eps <= PI / 30.0) {
            bad("eps", format!("{} is outside (0, pi/30]", self.eps));
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                bad("delta", format!("{d} must be positive"));
            }
        }
        if let Some(x) = self.xi {
            if !(x > 0.0 && x.is_finite()) {
                bad("xi", format!("{x} must be positive"));
            }
        }
        if self.samples < 2 {
            bad("samples", format!("{} is below 2", self.samples));
        }
        if self.cells == 0 {
            bad("cells", "must be at least 1".into());
        }
        if self.s_bins == 0 {
            bad("s_bins", "must be at least 1".into());
        }
        if self.tolerance != "f64" && self.tolerance != "f32" {
            bad("tolerance", format!("unknown policy {:?} (expected \"f64\" or \"f32\")", self.tolerance));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigError(errs))
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Args, Clone, Debug, Default)]
pub struct CommonArgs {
    /// JSON file with RunConfig fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "PANTS_OUT_DIR")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long = "R", short = 'R', global = true)]
    pub r: Option<f64>,
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub xi: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub cells: Option<usize>,
    #[arg(long, global = true)]
    pub s_bins: Option<usize>,
    #[arg(long, global = true)]
    pub count: Option<usize>,
    #[arg(long, global = true)]
    pub tolerance: Option<String>,
    /// A violation is the expected outcome: exit 0 when one is found.
    #[arg(long, global = true)]
    pub expect_violation: bool,
    /// Record wall-clock timings (reports are then no longer reproducible byte for byte).
    #[arg(long, global = true)]
    pub timings: bool,
}

pub fn load(file: Option<&Path>) -> anyhow::Result<RunConfig> {
    match file {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
        }
    }
}

impl CommonArgs {
    pub fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = load(self.config.as_deref())?;
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f.clone() { c.$f = v; } )* };
        }
        set!(n, r, eps, seed, samples, cells, s_bins, count, tolerance, out_dir);
        if self.delta.is_some() {
            c.delta = self.delta;
        }
        if self.xi.is_some() {
            c.xi = self.xi;
        }
        c.validate()?;
        Ok(c)
    }
}
