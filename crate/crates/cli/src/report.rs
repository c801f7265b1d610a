use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;

pub fn code_version() -> String {
    format!("{}+{}", env!("CARGO_PKG_VERSION"), env!("PANTS_CODE_HASH"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    /// Estimated by this run.
    Measured,
    /// Computed from a closed form.
    Derived,
    /// Taken from the configuration.
    Input,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Constant {
    pub value: f64,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Pass,
    Violation,
    ExpectedViolation,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Pass | Outcome::ExpectedViolation => 0,
            Outcome::Violation => 1,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub code_version: String,
    pub config: RunConfig,
    pub outcome: Outcome,
    pub checks: Vec<Check>,
    pub constants: BTreeMap<String, Constant>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub outputs: Vec<String>,
    pub data: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            code_version: code_version(),
            config: config.clone(),
            outcome: Outcome::Pass,
            checks: Vec::new(),
            constants: BTreeMap::new(),
            outputs: Vec::new(),
            data: Value::Null,
            timings_ms: None,
        }
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), pass, detail: detail.into() });
    }

    pub fn constant(&mut self, name: &str, value: f64, provenance: Provenance) {
        self.constants.insert(name.into(), Constant { value, provenance });
    }

    /// Sets the outcome from the checks.
    pub fn settle(&mut self, expect_violation: bool) {
        let failed = self.checks.iter().any(|c| !c.pass);
        self.outcome = match (failed, expect_violation) {
            (false, _) => Outcome::Pass,
            (true, true) => Outcome::ExpectedViolation,
            (true, false) => Outcome::Violation,
        };
    }
}

/// Output directory of one command.
pub struct OutDir {
    pub dir: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path, command: &str) -> anyhow::Result<Self> {
        let dir = root.join(command);
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(OutDir { dir, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let p = self.dir.join(name);
        fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))?;
        self.written.push(name.into());
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> anyhow::Result<()> {
        let mut buf = Vec::new();
        for r in rows {
            serde_json::to_writer(&mut buf, &r)?;
            buf.write_all(b"\n")?;
        }
        self.write(name, &buf)
    }

    pub fn finish(mut self, mut report: Report) -> anyhow::Result<Report> {
        self.written.sort();
        report.outputs = self.written.clone();
        let mut text = serde_json::to_vec_pretty(&report)?;
        text.push(b'\n');
        self.write("report.json", &text)?;
        Ok(report)
    }
}
