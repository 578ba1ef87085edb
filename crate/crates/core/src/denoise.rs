//! Per-class low-pass filtering of labeled features.
//!
//! Each class gets its own graph built from its own rows only; the rows are
//! replaced by `U H Uᵀ F_c` where `U` is the eigenbasis of that graph's
//! normalized Laplacian and `H` the step response.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledFeatures;
use crate::graph::{complete_graph, cosine_similarity, knn_graph};
use crate::spectral::{apply_filter, eigendecompose, normalized_laplacian, step_response, AdjacencyMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    /// Cosine-similarity kNN graph.
    Knn,
    /// Unit-weight complete graph.
    Complete,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphKind::Knn => "knn",
            GraphKind::Complete => "complete",
        })
    }
}

impl FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "knn" => Ok(GraphKind::Knn),
            "complete" => Ok(GraphKind::Complete),
            other => Err(Error::Config(format!("unknown graph kind {other:?} (expected knn or complete)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DenoiseConfig {
    pub knn_k: usize,
    pub k1: usize,
    pub k2: usize,
    pub mid_gain: f64,
    pub graph_kind: GraphKind,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        Self { knn_k: 10, k1: 1, k2: 4, mid_gain: 0.6, graph_kind: GraphKind::Knn }
    }
}

impl DenoiseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.knn_k == 0 {
            return Err(Error::Config("knn_k must be at least 1".into()));
        }
        if self.k1 == 0 || self.k1 > self.k2 {
            return Err(Error::Config(format!("need 1 <= k1 <= k2, got k1={}, k2={}", self.k1, self.k2)));
        }
        if !(0.0..=1.0).contains(&self.mid_gain) {
            return Err(Error::Config(format!("mid_gain {} outside [0, 1]", self.mid_gain)));
        }
        Ok(())
    }

    /// Effective configuration for a class of `m` samples: `knn_k` is clipped
    /// to `m - 1` and the step indices to `m`.
    pub fn for_class_size(&self, m: usize) -> Self {
        Self { knn_k: self.knn_k.min(m.saturating_sub(1)).max(1), k1: self.k1.min(m), k2: self.k2.min(m), ..*self }
    }
}

/// What [`denoise_dataset_with`] does with classes of a single sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SmallClassPolicy {
    #[default]
    PassThrough,
    Reject,
}

fn class_graph(features: &DMatrix<f64>, cfg: &DenoiseConfig) -> Result<AdjacencyMatrix> {
    let m = features.nrows();
    match cfg.graph_kind {
        GraphKind::Complete => complete_graph(m),
        GraphKind::Knn => {
            let s = cosine_similarity(features)?;
            knn_graph(&s, cfg.knn_k.min(m - 1))
        }
    }
}

/// Filters the rows of one class. `knn_k` is clipped to `m - 1`; `k1` and `k2`
/// must already fit the class size.
pub fn denoise_class(features: &DMatrix<f64>, cfg: &DenoiseConfig) -> Result<DMatrix<f64>> {
    let m = features.nrows();
    if m < 2 {
        return Err(Error::InvalidSize(format!("a class needs at least 2 samples to build a graph, got {m}")));
    }
    if cfg.knn_k == 0 {
        return Err(Error::InvalidK { k: 0, n: m });
    }
    let response = step_response(cfg.k1, cfg.k2, cfg.mid_gain, m)?;
    if response.gains().iter().all(|&g| g == 1.0) {
        return Ok(features.clone());
    }
    let adjacency = class_graph(features, cfg)?;
    let basis = eigendecompose(&normalized_laplacian(&adjacency)?)?;
    apply_filter(&basis, &response, features)
}

/// Filters every class independently; single-sample classes pass through.
pub fn denoise_dataset(data: &LabeledFeatures, cfg: &DenoiseConfig) -> Result<LabeledFeatures> {
    denoise_dataset_with(data, cfg, SmallClassPolicy::PassThrough)
}

pub fn denoise_dataset_with(
    data: &LabeledFeatures,
    cfg: &DenoiseConfig,
    policy: SmallClassPolicy,
) -> Result<LabeledFeatures> {
    cfg.validate()?;
    let groups = data.class_groups();
    if policy == SmallClassPolicy::Reject {
        if let Some((label, _)) = groups.iter().find(|(_, rows)| rows.len() < 2) {
            return Err(Error::ClassTooSmall(label.clone()));
        }
    }

    let filtered: Vec<Option<DMatrix<f64>>> = groups
        .par_iter()
        .map(|(label, rows)| {
            if rows.len() < 2 {
                log::warn!("class {label:?} has a single sample; passing it through unfiltered");
                return Ok(None);
            }
            let class_features = data.features().select_rows(rows);
            denoise_class(&class_features, &cfg.for_class_size(rows.len())).map(Some)
        })
        .collect::<Result<_>>()?;

    let mut out = data.features().clone();
    for ((_, rows), block) in groups.iter().zip(filtered) {
        if let Some(block) = block {
            for (src, &dst) in rows.iter().enumerate() {
                out.set_row(dst, &block.row(src));
            }
        }
    }
    LabeledFeatures::new(out, data.labels().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn sample() -> DMatrix<f64> {
        dmatrix![
            1.0, 0.2, 0.1;
            0.9, 0.3, -0.2;
            1.2, -0.1, 0.0;
            0.8, 0.0, 0.3;
            1.1, 0.1, 0.1
        ]
    }

    #[test]
    fn identity_step_is_noop() {
        let f = sample();
        let cfg = DenoiseConfig { k1: 5, k2: 5, ..Default::default() };
        assert_eq!(denoise_class(&f, &cfg).unwrap(), f);
    }

    #[test]
    fn complete_graph_k1_collapses_to_mean() {
        let f = sample();
        let cfg = DenoiseConfig { k1: 1, k2: 1, graph_kind: GraphKind::Complete, ..Default::default() };
        let out = denoise_class(&f, &cfg).unwrap();
        let mean = f.row_mean();
        for row in out.row_iter() {
            assert_abs_diff_eq!(row.into_owned(), mean, epsilon = 1e-12);
        }
    }

    #[test]
    fn knn_k_is_clipped() {
        let f = sample();
        let cfg = DenoiseConfig { knn_k: 50, k1: 1, k2: 4, ..Default::default() };
        let clipped = DenoiseConfig { knn_k: 4, ..cfg };
        assert_eq!(denoise_class(&f, &cfg).unwrap(), denoise_class(&f, &clipped).unwrap());
    }

    #[test]
    fn class_errors_propagate() {
        let mut f = sample();
        f.row_mut(2).fill(0.0);
        let cfg = DenoiseConfig { k1: 1, k2: 4, ..Default::default() };
        assert!(matches!(denoise_class(&f, &cfg), Err(Error::ZeroVector(2))));
        let bad = DenoiseConfig { k1: 1, k2: 6, ..Default::default() };
        assert!(matches!(denoise_class(&sample(), &bad), Err(Error::InvalidRange(_))));
        assert!(denoise_class(&dmatrix![1.0, 2.0], &cfg).is_err());
    }

    #[test]
    fn singleton_class_policy() {
        let data =
            LabeledFeatures::new(dmatrix![1.0, 0.0; 0.9, 0.1; 5.0, 5.0], vec!["a".into(), "a".into(), "b".into()])
                .unwrap();
        let cfg = DenoiseConfig { k1: 1, k2: 1, ..Default::default() };
        let out = denoise_dataset(&data, &cfg).unwrap();
        assert_eq!(out.features().row(2), data.features().row(2));
        assert!(matches!(
            denoise_dataset_with(&data, &cfg, SmallClassPolicy::Reject),
            Err(Error::ClassTooSmall(label)) if label == "b"
        ));
    }

    #[test]
    fn for_class_size_clips() {
        let cfg = DenoiseConfig { knn_k: 10, k1: 1, k2: 4, ..Default::default() };
        let small = cfg.for_class_size(3);
        assert_eq!((small.knn_k, small.k1, small.k2), (2, 1, 3));
        assert_eq!(cfg.for_class_size(100), cfg);
    }

    #[test]
    fn graph_kind_parses() {
        assert_eq!("knn".parse::<GraphKind>().unwrap(), GraphKind::Knn);
        assert_eq!("complete".parse::<GraphKind>().unwrap(), GraphKind::Complete);
        assert!("rbf".parse::<GraphKind>().is_err());
    }
}
