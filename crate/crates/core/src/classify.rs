//! Nearest-class-mean and 1-nearest-neighbour classifiers.
//!
//! Ties always go to the lowest index: the first class in order of first
//! appearance for NCM, the first training row for 1-NN.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVectorView, RowDVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::LabeledFeatures;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    /// `1 - cos(a, b)`; a zero vector is at distance 1 from everything.
    Cosine,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Euclidean => "euclidean",
            Metric::Cosine => "cosine",
        })
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!("unknown metric {other:?} (expected euclidean or cosine)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Ncm,
    Nn1,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Ncm => "ncm",
            ClassifierKind::Nn1 => "nn1",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ncm" => Ok(ClassifierKind::Ncm),
            "nn1" | "1nn" => Ok(ClassifierKind::Nn1),
            other => Err(Error::Config(format!("unknown classifier {other:?} (expected ncm or nn1)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub metric: Metric,
}

impl ClassifierConfig {
    /// Fits on `train` and labels every row of `query`.
    pub fn predict(&self, train: &LabeledFeatures, query: &DMatrix<f64>) -> Result<Vec<String>> {
        match self.kind {
            ClassifierKind::Ncm => ncm_predict(&ncm_fit(train, self.metric)?, query),
            ClassifierKind::Nn1 => nn1_predict(train, query, self.metric),
        }
    }
}

/// Distance between two rows under `metric`, with norms precomputed.
fn distance(metric: Metric, a: DVectorView<f64>, a_norm: f64, b: DVectorView<f64>, b_norm: f64) -> f64 {
    match metric {
        Metric::Euclidean => (a - b).norm_squared(),
        Metric::Cosine => {
            if a_norm == 0.0 || b_norm == 0.0 {
                1.0
            } else {
                1.0 - a.dot(&b) / (a_norm * b_norm)
            }
        }
    }
}

/// Index of the closest row of `reference` (stored as columns), lowest index on ties.
fn nearest(
    metric: Metric,
    reference: &DMatrix<f64>,
    reference_norms: &[f64],
    query: DVectorView<f64>,
    skip: Option<usize>,
) -> Option<usize> {
    let q_norm = query.norm();
    let mut best: Option<(usize, f64)> = None;
    for (j, col) in reference.column_iter().enumerate() {
        if Some(j) == skip {
            continue;
        }
        let dist = distance(metric, col, reference_norms[j], query, q_norm);
        if best.is_none_or(|(_, b)| dist < b) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

fn column_norms(m: &DMatrix<f64>) -> Vec<f64> {
    m.column_iter().map(|c| c.norm()).collect()
}

fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct NcmModel {
    centroids: DMatrix<f64>,
    class_ids: Vec<String>,
    metric: Metric,
}

impl NcmModel {
    /// One centroid per row, aligned with [`NcmModel::class_ids`].
    pub fn centroids(&self) -> &DMatrix<f64> {
        &self.centroids
    }

    pub fn class_ids(&self) -> &[String] {
        &self.class_ids
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }
}

pub fn ncm_fit(train: &LabeledFeatures, metric: Metric) -> Result<NcmModel> {
    let groups = train.class_groups();
    if groups.is_empty() {
        return Err(Error::EmptyClass(String::new()));
    }
    let d = train.d();
    let mut centroids = DMatrix::zeros(groups.len(), d);
    let mut class_ids = Vec::with_capacity(groups.len());
    for (c, (label, rows)) in groups.into_iter().enumerate() {
        if rows.is_empty() {
            return Err(Error::EmptyClass(label));
        }
        let mut sum = RowDVector::zeros(d);
        for &r in &rows {
            sum += train.features().row(r);
        }
        centroids.set_row(c, &(sum / rows.len() as f64));
        class_ids.push(label);
    }
    Ok(NcmModel { centroids, class_ids, metric })
}

pub fn ncm_predict(model: &NcmModel, query: &DMatrix<f64>) -> Result<Vec<String>> {
    check_dim(model.centroids.ncols(), query.ncols())?;
    let reference = model.centroids.transpose();
    let norms = column_norms(&reference);
    let query_t = query.transpose();
    Ok(query_t
        .column_iter()
        .map(|q| {
            let c = nearest(model.metric, &reference, &norms, q, None).expect("model has classes");
            model.class_ids[c].clone()
        })
        .collect())
}

pub fn nn1_predict(train: &LabeledFeatures, query: &DMatrix<f64>, metric: Metric) -> Result<Vec<String>> {
    if train.n() == 0 {
        return Err(Error::EmptyClass(String::new()));
    }
    check_dim(train.d(), query.ncols())?;
    let reference = train.features().transpose();
    let norms = column_norms(&reference);
    let query_t = query.transpose();
    let cols: Vec<_> = query_t.column_iter().collect();
    Ok(cols
        .par_iter()
        .map(|q| {
            let j = nearest(metric, &reference, &norms, *q, None).expect("train is nonempty");
            train.labels()[j].clone()
        })
        .collect())
}

/// 1-NN label of every training row using all other rows.
pub fn nn1_leave_one_out(train: &LabeledFeatures, metric: Metric) -> Result<Vec<String>> {
    if train.n() < 2 {
        return Err(Error::InvalidSize(format!("leave-one-out needs at least 2 rows, got {}", train.n())));
    }
    let reference = train.features().transpose();
    let norms = column_norms(&reference);
    Ok((0..train.n())
        .map(|i| {
            let j = nearest(metric, &reference, &norms, reference.column(i), Some(i)).expect("at least one other row");
            train.labels()[j].clone()
        })
        .collect())
}

/// Fraction of positions where `predicted` equals `truth`.
pub fn accuracy(predicted: &[String], truth: &[String]) -> f64 {
    assert_eq!(predicted.len(), truth.len());
    if truth.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    hits as f64 / truth.len() as f64
}
