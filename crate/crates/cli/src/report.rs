//! Experiment reports and their files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use monoflow::flow::{EigenPath, FlowResult};
use monoflow::index::IndexResult;
use monoflow::Result;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowEntry {
    pub label: String,
    pub result: Option<FlowResult>,
    pub error: Option<String>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IndexEntry {
    pub label: String,
    pub result: Option<IndexResult>,
    pub error: Option<String>,
    pub seconds: f64,
}

impl IndexEntry {
    pub fn value(&self) -> Option<i64> {
        self.result.as_ref().map(|r| r.value)
    }
}

impl FlowEntry {
    pub fn net(&self) -> Option<i64> {
        self.result.as_ref().map(|r| r.net_flow)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct InvariantEntry {
    pub name: String,
    pub value: f64,
    pub tol: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Verdict {
    /// e.g. "SF == Ind".
    pub line: String,
    pub lhs: Option<i64>,
    pub rhs: Option<i64>,
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn compare(line: &str, lhs: Option<i64>, rhs: Option<i64>, detail: impl Into<String>) -> Self {
        let pass = matches!((lhs, rhs), (Some(a), Some(b)) if a == b);
        Verdict { line: line.into(), lhs, rhs, pass, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub name: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub flows: Vec<FlowEntry>,
    pub indices: Vec<IndexEntry>,
    pub oracles: Vec<IndexEntry>,
    pub invariants: Vec<InvariantEntry>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub wall_time_s: f64,
    /// Eigenvalue trajectories per flow label; written as CSV, not JSON.
    #[serde(skip)]
    pub trajectories: Vec<(String, EigenPath)>,
}

impl Report {
    pub fn new(config: &ExperimentConfig) -> Self {
        Report {
            schema_version: SCHEMA_VERSION,
            name: config.name.clone(),
            config_hash: config.hash(),
            config: config.clone(),
            flows: vec![],
            indices: vec![],
            oracles: vec![],
            invariants: vec![],
            verdicts: vec![],
            warnings: vec![],
            wall_time_s: 0.0,
            trajectories: vec![],
        }
    }

    /// All verdicts pass (and there is at least one).
    pub fn passed(&self) -> bool {
        !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.pass)
    }

    pub fn flow(&self, label: &str) -> Option<&FlowEntry> {
        self.flows.iter().find(|f| f.label == label)
    }

    pub fn index(&self, label: &str) -> Option<&IndexEntry> {
        self.indices.iter().find(|f| f.label == label)
    }

    pub fn oracle(&self, label: &str) -> Option<&IndexEntry> {
        self.oracles.iter().find(|f| f.label == label)
    }

    /// Human-readable summary, one line per item.
    pub fn lines(&self) -> Vec<String> {
        let show = |v: Option<i64>| v.map(|x| x.to_string()).unwrap_or_else(|| "-".into());
        let mut out = vec![format!("experiment {} (config {})", self.name, &self.config_hash[..12])];
        for f in &self.flows {
            match (&f.result, &f.error) {
                (Some(r), _) => out.push(format!(
                    "  flow {}: net {} (all {}), {} crossings, {} evaluations, {:.2}s",
                    f.label,
                    r.net_flow,
                    r.net_flow_all,
                    r.crossings.len(),
                    r.diagnostics.evaluations,
                    f.seconds
                )),
                (None, e) => out.push(format!("  flow {}: error {}", f.label, e.clone().unwrap_or_default())),
            }
        }
        for (kind, list) in [("index", &self.indices), ("oracle", &self.oracles)] {
            for i in list {
                match (&i.result, &i.error) {
                    (Some(r), _) => out.push(format!(
                        "  {kind} {}: {} (raw {:.6}, stable {}), {:.2}s",
                        i.label, r.value, r.raw, r.stable, i.seconds
                    )),
                    (None, e) => out.push(format!("  {kind} {}: error {}", i.label, e.clone().unwrap_or_default())),
                }
            }
        }
        for c in &self.invariants {
            out.push(format!(
                "  invariant {}: {:.3e} (tol {:.1e}) {}",
                c.name,
                c.value,
                c.tol,
                if c.pass { "ok" } else { "FAILED" }
            ));
        }
        for w in &self.warnings {
            out.push(format!("  warning: {w}"));
        }
        for v in &self.verdicts {
            out.push(format!(
                "  [{}] {}: {} vs {} {}",
                if v.pass { "PASS" } else { "FAIL" },
                v.line,
                show(v.lhs),
                show(v.rhs),
                v.detail
            ));
        }
        out.push(format!("  wall time {:.2}s", self.wall_time_s));
        out
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| monoflow::Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| monoflow::Error::Config(e.to_string()))
    }
}

/// Write through a temporary file and rename, so readers never see a
/// partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn file_stem(label: &str) -> String {
    label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// One CSV per trajectory (`alpha,track,re,im,bulk`) and a JSON summary.
/// Returns the written paths, summary last.
pub fn emit_trajectories(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (label, path) in &report.trajectories {
        let p = dir.join(format!("{}_{}.csv", file_stem(&report.name), file_stem(label)));
        let mut buf = Vec::new();
        path.write_csv(&mut buf)?;
        write_atomic(&p, &buf)?;
        written.push(p);
    }
    let summary = dir.join(format!("{}.json", file_stem(&report.name)));
    write_atomic(&summary, report.to_json()?.as_bytes())?;
    written.push(summary);
    Ok(written)
}
