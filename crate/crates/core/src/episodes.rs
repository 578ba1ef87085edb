//! Few-shot evaluation: N-way m-shot episodes, paired with/without filtering.
//!
//! Every episode is drawn from its own ChaCha stream of the base seed, and
//! both arms classify the same queries from the same support set. Only the
//! support set is ever filtered.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{accuracy, ClassifierConfig};
use crate::denoise::{denoise_dataset, DenoiseConfig};
use crate::error::{Error, Result};
use crate::features::LabeledFeatures;
use crate::stats::{mean, sample_variance};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSpec {
    pub n_way: usize,
    pub m_shot: usize,
    pub q_query: usize,
}

impl Default for EpisodeSpec {
    fn default() -> Self {
        Self { n_way: 5, m_shot: 5, q_query: 15 }
    }
}

impl EpisodeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_way < 2 || self.m_shot < 1 || self.q_query < 1 {
            return Err(Error::Config(format!("need n_way >= 2, m_shot >= 1, q_query >= 1; got {self:?}")));
        }
        Ok(())
    }

    fn per_class(&self) -> usize {
        self.m_shot + self.q_query
    }
}

/// Feature pool indexed by class, ready for repeated episode sampling.
#[derive(Debug, Clone)]
pub struct EpisodePool {
    data: LabeledFeatures,
    groups: Vec<(String, Vec<usize>)>,
}

impl EpisodePool {
    pub fn new(data: LabeledFeatures) -> Self {
        let groups = data.class_groups();
        Self { data, groups }
    }

    pub fn data(&self) -> &LabeledFeatures {
        &self.data
    }

    pub fn n_classes(&self) -> usize {
        self.groups.len()
    }

    fn eligible(&self, spec: &EpisodeSpec) -> Result<Vec<usize>> {
        spec.validate()?;
        let eligible: Vec<usize> =
            (0..self.groups.len()).filter(|&c| self.groups[c].1.len() >= spec.per_class()).collect();
        if eligible.len() < spec.n_way {
            return Err(Error::InsufficientPool(format!(
                "{} classes have at least {} samples, {} needed",
                eligible.len(),
                spec.per_class(),
                spec.n_way
            )));
        }
        Ok(eligible)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Episode {
    /// `n_way * m_shot` rows labeled `"0"..n_way-1`, grouped by class.
    pub support: LabeledFeatures,
    /// `n_way * q_query` rows with the same remapped labels.
    pub query: LabeledFeatures,
    /// Original pool label of each remapped class.
    pub classes: Vec<String>,
    /// Pool row indices of support and query samples, in episode order.
    pub support_rows: Vec<usize>,
    pub query_rows: Vec<usize>,
}

fn sample_from_eligible<R: Rng>(
    pool: &EpisodePool,
    spec: &EpisodeSpec,
    eligible: &[usize],
    rng: &mut R,
) -> Result<Episode> {
    let picked = index::sample(rng, eligible.len(), spec.n_way);
    let mut support_rows = Vec::with_capacity(spec.n_way * spec.m_shot);
    let mut query_rows = Vec::with_capacity(spec.n_way * spec.q_query);
    let mut support_labels = Vec::with_capacity(support_rows.capacity());
    let mut query_labels = Vec::with_capacity(query_rows.capacity());
    let mut classes = Vec::with_capacity(spec.n_way);

    for (local, slot) in picked.into_iter().enumerate() {
        let (label, rows) = &pool.groups[eligible[slot]];
        let chosen = index::sample(rng, rows.len(), spec.per_class());
        let tag = local.to_string();
        for (i, r) in chosen.into_iter().enumerate() {
            if i < spec.m_shot {
                support_rows.push(rows[r]);
                support_labels.push(tag.clone());
            } else {
                query_rows.push(rows[r]);
                query_labels.push(tag.clone());
            }
        }
        classes.push(label.clone());
    }

    let features = pool.data.features();
    Ok(Episode {
        support: LabeledFeatures::new(features.select_rows(&support_rows), support_labels)?,
        query: LabeledFeatures::new(features.select_rows(&query_rows), query_labels)?,
        classes,
        support_rows,
        query_rows,
    })
}

/// Draws classes, then per-class samples, uniformly without replacement.
pub fn sample_episode_with<R: Rng>(pool: &EpisodePool, spec: &EpisodeSpec, rng: &mut R) -> Result<Episode> {
    let eligible = pool.eligible(spec)?;
    sample_from_eligible(pool, spec, &eligible, rng)
}

pub fn sample_episode(pool: &EpisodePool, spec: &EpisodeSpec, seed: u64) -> Result<Episode> {
    sample_episode_with(pool, spec, &mut ChaCha8Rng::seed_from_u64(seed))
}

fn episode_rng(seed: u64, episode: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode as u64);
    rng
}

/// Mean and `1.96 · s / sqrt(n)` with the unbiased sample deviation `s`.
pub fn confidence_interval(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::TooFewSamples(values.len()));
    }
    let halfwidth = Z95 * (sample_variance(values) / values.len() as f64).sqrt();
    Ok((mean(values), halfwidth))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FewShotConfig {
    pub episode: EpisodeSpec,
    pub denoise: DenoiseConfig,
    pub classifier: ClassifierConfig,
    pub iterations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_accuracy: f64,
    pub ci95_halfwidth: f64,
    pub iterations: usize,
    pub config_echo: serde_json::Value,
}

impl EvalReport {
    pub fn from_accuracies(accuracies: &[f64], config_echo: serde_json::Value) -> Result<Self> {
        let (mean_accuracy, ci95_halfwidth) = confidence_interval(accuracies)?;
        Ok(Self { mean_accuracy, ci95_halfwidth, iterations: accuracies.len(), config_echo })
    }
}

/// Both arms of a paired evaluation plus the statistics of their per-episode
/// difference (`with - without`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEval {
    pub without_filter: EvalReport,
    pub with_filter: EvalReport,
    pub delta_mean: f64,
    pub delta_ci95: f64,
}

impl PairedEval {
    pub fn from_paired(raw: &[f64], filtered: &[f64], config_echo: serde_json::Value) -> Result<Self> {
        let deltas: Vec<f64> = filtered.iter().zip(raw).map(|(f, r)| f - r).collect();
        let (delta_mean, delta_ci95) = confidence_interval(&deltas)?;
        Ok(Self {
            without_filter: EvalReport::from_accuracies(raw, config_echo.clone())?,
            with_filter: EvalReport::from_accuracies(filtered, config_echo)?,
            delta_mean,
            delta_ci95,
        })
    }
}

/// Accuracy of one episode without and with support filtering.
pub fn evaluate_episode(
    episode: &Episode,
    denoise: &DenoiseConfig,
    classifier: &ClassifierConfig,
) -> Result<(f64, f64)> {
    let truth = episode.query.labels();
    let query: &DMatrix<f64> = episode.query.features();
    let raw = accuracy(&classifier.predict(&episode.support, query)?, truth);
    let filtered_support = denoise_dataset(&episode.support, denoise)?;
    let filtered = accuracy(&classifier.predict(&filtered_support, query)?, truth);
    Ok((raw, filtered))
}

pub fn run_fewshot_eval(pool: &EpisodePool, cfg: &FewShotConfig) -> Result<PairedEval> {
    if cfg.iterations < 2 {
        return Err(Error::TooFewSamples(cfg.iterations));
    }
    cfg.denoise.validate()?;
    let eligible = pool.eligible(&cfg.episode)?;
    let pairs: Vec<(f64, f64)> = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| {
            let episode = sample_from_eligible(pool, &cfg.episode, &eligible, &mut episode_rng(cfg.seed, i))?;
            evaluate_episode(&episode, &cfg.denoise, &cfg.classifier)
        })
        .collect::<Result<_>>()?;
    let (raw, filtered): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    PairedEval::from_paired(&raw, &filtered, serde_json::to_value(cfg)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub m_shot: usize,
    pub result: PairedEval,
}

/// One paired evaluation per shot count; every point reuses the base seed.
pub fn sweep_shots(pool: &EpisodePool, base: &FewShotConfig, m_values: &[usize]) -> Result<Vec<SweepPoint>> {
    m_values
        .iter()
        .map(|&m_shot| {
            let cfg = FewShotConfig { episode: EpisodeSpec { m_shot, ..base.episode }, ..*base };
            Ok(SweepPoint { m_shot, result: run_fewshot_eval(pool, &cfg)? })
        })
        .collect()
}

/// Tab-separated table with one row per shot count.
pub fn sweep_table(points: &[SweepPoint]) -> String {
    let mut out = String::from("m_shot\twithout\twithout_ci95\twith\twith_ci95\tdelta\tdelta_ci95\n");
    for p in points {
        let r = &p.result;
        let _ = writeln!(
            out,
            "{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
            p.m_shot,
            r.without_filter.mean_accuracy,
            r.without_filter.ci95_halfwidth,
            r.with_filter.mean_accuracy,
            r.with_filter.ci95_halfwidth,
            r.delta_mean,
            r.delta_ci95
        );
    }
    out
}
