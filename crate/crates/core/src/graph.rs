//! Similarity graphs over the feature vectors of one class.

use std::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::AdjacencyMatrix;

/// Weight given to an edge restored to reconnect a vertex that clamping isolated.
pub const RESTORED_EDGE_WEIGHT: f64 = 1e-6;

/// Pairwise similarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
}

impl SimilarityMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        AdjacencyMatrix::from_signed(values.clone())?;
        Ok(Self { values })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Cosine similarity between every pair of rows of `features`.
pub fn cosine_similarity(features: &DMatrix<f64>) -> Result<SimilarityMatrix> {
    let n = features.nrows();
    let norms: Vec<f64> = features.row_iter().map(|r| r.norm()).collect();
    if let Some(i) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::ZeroVector(i));
    }
    let mut values = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let dot = features.row(i).dot(&features.row(j));
            let s = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[(i, j)] = s;
            values[(j, i)] = s;
        }
    }
    Ok(SimilarityMatrix { values })
}

/// Off-diagonal column indices of row `i`, best first; ties go to the lower index.
fn ranked_neighbours(s: &DMatrix<f64>, i: usize) -> Vec<usize> {
    let mut cols: Vec<usize> = (0..s.ncols()).filter(|&j| j != i).collect();
    cols.sort_by(|&a, &b| match s[(i, b)].total_cmp(&s[(i, a)]) {
        Ordering::Equal => a.cmp(&b),
        other => other,
    });
    cols
}

/// Union of the row-wise and column-wise top-`k` patterns of `s`.
pub fn knn_mask(s: &SimilarityMatrix, k: usize) -> Result<DMatrix<bool>> {
    let n = s.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidK { k, n });
    }
    let mut mask = DMatrix::from_element(n, n, false);
    for i in 0..n {
        for j in ranked_neighbours(&s.values, i).into_iter().take(k) {
            mask[(i, j)] = true;
            mask[(j, i)] = true;
        }
    }
    Ok(mask)
}

/// Keeps `S[i][j]` when it is among the `k` largest entries of row `i` or of
/// column `j`. Retained weights are raw similarities and may be negative.
pub fn knn_sparsify(s: &SimilarityMatrix, k: usize) -> Result<AdjacencyMatrix> {
    let mask = knn_mask(s, k)?;
    let weights = s.values.zip_map(&mask, |v, keep| if keep { v } else { 0.0 });
    AdjacencyMatrix::from_signed(weights)
}

/// kNN graph ready for a Laplacian: negative retained weights are clamped to
/// zero, and a vertex left without edges gets its best retained edge back with
/// weight [`RESTORED_EDGE_WEIGHT`].
pub fn knn_graph(s: &SimilarityMatrix, k: usize) -> Result<AdjacencyMatrix> {
    let mask = knn_mask(s, k)?;
    let n = s.n();
    let mut weights = s.values.zip_map(&mask, |v, keep| if keep { v.max(0.0) } else { 0.0 });
    for i in 0..n {
        if weights.row(i).iter().any(|&w| w > 0.0) {
            continue;
        }
        let best = ranked_neighbours(&s.values, i)
            .into_iter()
            .find(|&j| mask[(i, j)])
            .expect("every vertex keeps at least its top-1 edge");
        log::debug!("vertex {i} isolated after clamping; restoring edge to {best}");
        weights[(i, best)] = RESTORED_EDGE_WEIGHT;
        weights[(best, i)] = RESTORED_EDGE_WEIGHT;
    }
    AdjacencyMatrix::new(weights)
}

/// Unit-weight complete graph on `m` vertices.
pub fn complete_graph(m: usize) -> Result<AdjacencyMatrix> {
    if m < 2 {
        return Err(Error::InvalidSize(format!("a complete graph needs at least 2 vertices, got {m}")));
    }
    AdjacencyMatrix::new(DMatrix::from_fn(m, m, |i, j| if i == j { 0.0 } else { 1.0 }))
}
