//! JSON reports written by every subcommand.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episodes::PairedEval;
use crate::error::Result;
use crate::io::config::{Mode, RunConfig};
use crate::theory::TheoryReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultEntry {
    /// e.g. `m_shot=5` or `nn1/euclidean`.
    pub name: String,
    #[serde(flatten)]
    pub paired: PairedEval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub mode: Mode,
    /// Effective configuration after file, flag and clipping rules.
    pub config: RunConfig,
    pub results: Vec<ResultEntry>,
    pub theory: Option<TheoryReport>,
}

impl Report {
    pub fn new(config: RunConfig) -> Self {
        Self { mode: config.mode, config, results: Vec::new(), theory: None }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit_report(report: &Report, path: &Path) -> Result<()> {
    let mut text = report.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<Report> {
    Report::from_json(&fs::read_to_string(path)?)
}
