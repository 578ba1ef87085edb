//! Run configuration: built-in defaults, `key = value` files, CLI overrides.
//!
//! Config files are flat `section.key = value` lines; `#` starts a comment
//! line. Unknown or repeated keys are errors.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierConfig, ClassifierKind, Metric};
use crate::denoise::{DenoiseConfig, GraphKind};
use crate::episodes::EpisodeSpec;
use crate::error::{Error, Result};
use crate::io::format::FileFormat;
use crate::synth::SynthConfig;
use crate::theory::TheoryConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Denoise,
    EvalFewshot,
    EvalStandard,
    VerifyTheory,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Denoise => "denoise",
            Mode::EvalFewshot => "eval-fewshot",
            Mode::EvalStandard => "eval-standard",
            Mode::VerifyTheory => "verify-theory",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Held-out features for `eval-standard`; without it the input is split.
    pub test: Option<PathBuf>,
    /// Overrides extension-based format detection for every file.
    pub format: Option<FileFormat>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    /// Fraction of each class kept for training when no test file is given.
    pub train_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub iterations: usize,
    pub denoise: DenoiseConfig,
    pub episode: EpisodeSpec,
    /// Shot counts to sweep in `eval-fewshot`; empty means `episode.m_shot` only.
    pub m_values: Vec<usize>,
    pub classifier: ClassifierConfig,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub split: SplitConfig,
    pub theory: TheoryConfig,
}

impl RunConfig {
    pub fn defaults_for(mode: Mode) -> Self {
        let (denoise, classifier) = match mode {
            Mode::EvalFewshot | Mode::VerifyTheory => (
                DenoiseConfig { knn_k: 10, k1: 1, k2: 4, mid_gain: 0.6, graph_kind: GraphKind::Knn },
                ClassifierConfig { kind: ClassifierKind::Nn1, metric: Metric::Cosine },
            ),
            Mode::Denoise | Mode::EvalStandard => (
                DenoiseConfig { knn_k: 10, k1: 20, k2: 55, mid_gain: 0.6, graph_kind: GraphKind::Knn },
                ClassifierConfig { kind: ClassifierKind::Nn1, metric: Metric::Euclidean },
            ),
        };
        Self {
            mode,
            seed: 0,
            iterations: 2000,
            denoise,
            episode: EpisodeSpec::default(),
            m_values: Vec::new(),
            classifier,
            paths: Paths::default(),
            synth: SynthConfig::default(),
            split: SplitConfig::default(),
            theory: TheoryConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.denoise.validate()?;
        self.episode.validate()?;
        if self.iterations < 2 {
            return Err(Error::Config(format!("iterations must be >= 2, got {}", self.iterations)));
        }
        if self.m_values.contains(&0) {
            return Err(Error::Config("m_values entries must be >= 1".into()));
        }
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "split.train_fraction must lie in (0, 1), got {}",
                self.split.train_fraction
            )));
        }
        if self.theory.trials < crate::theory::MIN_TRIALS {
            return Err(Error::Config(format!(
                "theory.trials must be >= {}, got {}",
                crate::theory::MIN_TRIALS,
                self.theory.trials
            )));
        }
        if self.theory.m_values.iter().any(|&m| m < 2) || self.theory.lowpass_k == 0 {
            return Err(Error::Config("theory.m_values entries must be >= 2 and theory.lowpass_k >= 1".into()));
        }
        if self.theory.m_values.iter().any(|&m| m < self.theory.lowpass_k) {
            return Err(Error::Config("theory.lowpass_k exceeds a theory.m_values entry".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => {
                self.seed = parse(key, value)?;
                self.theory.seed = self.seed;
            }
            "iterations" => self.iterations = parse(key, value)?,
            "denoise.knn_k" => self.denoise.knn_k = parse(key, value)?,
            "denoise.k1" => self.denoise.k1 = parse(key, value)?,
            "denoise.k2" => self.denoise.k2 = parse(key, value)?,
            "denoise.mid_gain" => self.denoise.mid_gain = parse(key, value)?,
            "denoise.graph" => self.denoise.graph_kind = parse(key, value)?,
            "episode.n_way" => self.episode.n_way = parse(key, value)?,
            "episode.m_shot" => self.episode.m_shot = parse(key, value)?,
            "episode.q_query" => self.episode.q_query = parse(key, value)?,
            "episode.m_values" => self.m_values = parse_list(key, value)?,
            "classifier.kind" => self.classifier.kind = parse(key, value)?,
            "classifier.metric" => self.classifier.metric = parse(key, value)?,
            "io.in" => self.paths.input = Some(PathBuf::from(value)),
            "io.out" => self.paths.output = Some(PathBuf::from(value)),
            "io.test" => self.paths.test = Some(PathBuf::from(value)),
            "io.format" => self.paths.format = Some(parse(key, value)?),
            "synth.classes" => self.synth.classes = parse(key, value)?,
            "synth.per_class" => self.synth.per_class = parse(key, value)?,
            "synth.d" => self.synth.d = parse(key, value)?,
            "synth.separation" => self.synth.separation = parse(key, value)?,
            "synth.sigma" => self.synth.sigma = parse(key, value)?,
            "synth.offset" => self.synth.offset = parse(key, value)?,
            "synth.seed" => self.synth.seed = parse(key, value)?,
            "split.train_fraction" => self.split.train_fraction = parse(key, value)?,
            "theory.m_values" => self.theory.m_values = parse_list(key, value)?,
            "theory.d" => self.theory.d = parse(key, value)?,
            "theory.sigma" => self.theory.sigma = parse(key, value)?,
            "theory.mu" => self.theory.mu = parse(key, value)?,
            "theory.graph" => self.theory.graph_kind = parse(key, value)?,
            "theory.knn_k" => self.theory.knn_k = parse(key, value)?,
            "theory.lowpass_k" => self.theory.lowpass_k = parse(key, value)?,
            "theory.trials" => self.theory.trials = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies every entry of a parsed config file.
    pub fn apply_file(&mut self, entries: &BTreeMap<String, String>) -> Result<()> {
        for (key, value) in entries {
            self.set(key, value)?;
        }
        Ok(())
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key} = {value:?}: {e}")))
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

/// Parses a `key = value` document.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", idx + 1)))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", idx + 1)));
        }
        if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: duplicate key {key:?}", idx + 1)));
        }
    }
    Ok(entries)
}

pub fn load_config_file(path: &Path) -> Result<BTreeMap<String, String>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
