//! Append-only JSON-lines report file.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const REPORT_FILE: &str = "reports.jsonl";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportLine {
    pub id: String,
    pub kind: String,
    pub command: Vec<String>,
    pub config: Value,
    pub result: Value,
}

impl ReportLine {
    pub fn new(kind: &str, config: impl Serialize, result: impl Serialize) -> Result<Self> {
        Ok(Self {
            id: uuid::Uuid::new_v4().to_string(),
            kind: kind.to_string(),
            command: std::env::args().collect(),
            config: serde_json::to_value(config)?,
            result: serde_json::to_value(result)?,
        })
    }
}

pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join(REPORT_FILE)
}

/// Appends one line with a single write so concurrent writers do not interleave.
pub fn append(out_dir: &Path, line: &ReportLine) -> Result<()> {
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let path = report_path(out_dir);
    let mut text = serde_json::to_string(line)?;
    text.push('\n');
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&path)
        .with_context(|| format!("opening {}", path.display()))?;
    f.write_all(text.as_bytes())
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn find(path: &Path, id: Option<&str>) -> Result<ReportLine> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).rev();
    let raw = match id {
        None => lines.next(),
        Some(id) => lines.find(|l| {
            serde_json::from_str::<ReportLine>(l)
                .map(|r| r.id == id)
                .unwrap_or(false)
        }),
    };
    let raw = raw.ok_or_else(|| anyhow!(copuf::Error::Config(format!("no matching report in {}", path.display()))))?;
    serde_json::from_str(raw).map_err(|e| anyhow!(copuf::Error::Json(e)))
}
