//! Normalized Laplacians, their eigenbases, and spectral filtering of graph signals.
//!
//! Signals live on the vertices of a weighted undirected graph. A feature
//! matrix with `n` rows is treated as `d` independent signals, one per column,
//! and every operation here acts column-wise.
//!
//! ```text
//! L      = I - D^{-1/2} W D^{-1/2}
//! L      = U diag(λ) Uᵀ,   λ ascending
//! gft    x ↦ Uᵀ x
//! igft   x̂ ↦ U x̂
//! filter F ↦ U diag(h) Uᵀ F
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues in `[-PSD_FLOOR, 0)` are round-off and get clamped to zero.
pub const PSD_FLOOR: f64 = 1e-9;

const SYMMETRY_TOL: f64 = 1e-12;
const EIGEN_EPS: f64 = 1e-15;
const EIGEN_MAX_ITER: usize = 10_000;

/// Symmetric weight matrix with zero diagonal describing one graph.
///
/// Weights built through [`AdjacencyMatrix::new`] are nonnegative. Raw kNN
/// selections (see [`crate::graph::knn_sparsify`]) may still carry negative
/// similarities; [`normalized_laplacian`] refuses those.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    weights: DMatrix<f64>,
}

impl AdjacencyMatrix {
    pub fn new(weights: DMatrix<f64>) -> Result<Self> {
        let adj = Self::from_signed(weights)?;
        if let Some(((i, j), w)) = adj.first_negative() {
            return Err(Error::InvalidMatrix(format!("negative weight {w} at ({i}, {j})")));
        }
        Ok(adj)
    }

    /// Checks symmetry and the zero diagonal but lets negative weights through.
    pub(crate) fn from_signed(weights: DMatrix<f64>) -> Result<Self> {
        check_square(&weights)?;
        check_symmetric(&weights)?;
        if let Some(i) = (0..weights.nrows()).find(|&i| weights[(i, i)] != 0.0) {
            return Err(Error::InvalidMatrix(format!("nonzero diagonal entry at vertex {i}")));
        }
        Ok(Self { weights })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.weights
    }

    pub fn is_nonnegative(&self) -> bool {
        self.first_negative().is_none()
    }

    fn first_negative(&self) -> Option<((usize, usize), f64)> {
        let n = self.n();
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| ((i, j), self.weights[(i, j)]))
            .find(|&(_, w)| w < 0.0)
    }
}

/// Row sums of an adjacency matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeVector(pub DVector<f64>);

impl DegreeVector {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }
}

/// Symmetric matrix handed to the eigensolver.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    entries: DMatrix<f64>,
}

impl LaplacianMatrix {
    /// Wraps an arbitrary symmetric matrix, e.g. one read back from disk.
    pub fn from_symmetric(entries: DMatrix<f64>) -> Result<Self> {
        check_square(&entries)?;
        check_symmetric(&entries)?;
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// `tr(Fᵀ L F)`, the total variation of the columns of `signals` on the graph.
    pub fn quadratic_form(&self, signals: &DMatrix<f64>) -> Result<f64> {
        check_rows(self.n(), signals.nrows())?;
        Ok((signals.transpose() * &self.entries * signals).trace())
    }
}

/// Orthonormal eigenvectors (as columns) paired with ascending eigenvalues.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
}

impl SpectralBasis {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// `U diag(λ) Uᵀ`
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut scaled = self.eigenvectors.clone();
        for (mut col, &lambda) in scaled.column_iter_mut().zip(self.eigenvalues.iter()) {
            col *= lambda;
        }
        scaled * self.eigenvectors.transpose()
    }
}

/// Per-eigenvalue-index gain `h(λ_i)`; every entry lies in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResponse {
    gains: Vec<f64>,
}

impl FilterResponse {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if let Some((i, g)) = gains.iter().enumerate().find(|(_, g)| !(0.0..=1.0).contains(*g)) {
            return Err(Error::InvalidRange(format!("gain {g} at index {i} outside [0, 1]")));
        }
        Ok(Self { gains })
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }
}

pub fn degree_vector(w: &AdjacencyMatrix) -> DegreeVector {
    let degrees = w.weights.row_iter().map(|row| row.sum()).collect::<Vec<_>>();
    DegreeVector(DVector::from_vec(degrees))
}

/// Symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
pub fn normalized_laplacian(w: &AdjacencyMatrix) -> Result<LaplacianMatrix> {
    if let Some(((i, j), v)) = w.first_negative() {
        return Err(Error::InvalidMatrix(format!(
            "negative weight {v} at ({i}, {j}); clamp before building the Laplacian"
        )));
    }
    let degrees = degree_vector(w);
    if let Some(i) = degrees.0.iter().position(|&d| d <= 0.0) {
        return Err(Error::IsolatedVertex(i));
    }
    let inv_sqrt: Vec<f64> = degrees.0.iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = w.n();
    let mut entries = DMatrix::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = -(inv_sqrt[i] * w.weights[(i, j)] * inv_sqrt[j]);
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    Ok(LaplacianMatrix { entries })
}

/// Dense symmetric eigendecomposition with a reproducible ordering.
///
/// Eigenpairs are sorted by ascending eigenvalue, ties by the solver's
/// original column index. Each eigenvector is flipped so that its entry of
/// largest magnitude (lowest index on ties) is nonnegative.
pub fn eigendecompose(l: &LaplacianMatrix) -> Result<SpectralBasis> {
    let n = l.n();
    if n == 0 {
        return Ok(SpectralBasis { eigenvectors: DMatrix::zeros(0, 0), eigenvalues: DVector::zeros(0) });
    }
    let eig = SymmetricEigen::try_new(l.entries.clone(), EIGEN_EPS, EIGEN_MAX_ITER).ok_or(Error::ConvergenceFailure)?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::ConvergenceFailure);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));

    let mut eigenvectors = DMatrix::zeros(n, n);
    let mut eigenvalues = DVector::zeros(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lambda = eig.eigenvalues[src];
        if (-PSD_FLOOR..0.0).contains(&lambda) {
            lambda = 0.0;
        }
        eigenvalues[dst] = lambda;

        let col = eig.eigenvectors.column(src);
        let mut pivot = 0;
        for i in 1..n {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        eigenvectors.set_column(dst, &(col * sign));
    }
    Ok(SpectralBasis { eigenvectors, eigenvalues })
}

/// Graph Fourier transform `Uᵀ x`.
pub fn gft(basis: &SpectralBasis, x: &DVector<f64>) -> Result<DVector<f64>> {
    check_rows(basis.n(), x.len())?;
    Ok(basis.eigenvectors.tr_mul(x))
}

/// Inverse graph Fourier transform `U x̂`.
pub fn igft(basis: &SpectralBasis, spectrum: &DVector<f64>) -> Result<DVector<f64>> {
    check_rows(basis.n(), spectrum.len())?;
    Ok(&basis.eigenvectors * spectrum)
}

/// `U diag(h) Uᵀ F`, filtering every column of `signals` independently.
pub fn apply_filter(basis: &SpectralBasis, response: &FilterResponse, signals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_rows(basis.n(), response.len())?;
    check_rows(basis.n(), signals.nrows())?;
    let mut spectrum = basis.eigenvectors.tr_mul(signals);
    for (mut row, &g) in spectrum.row_iter_mut().zip(response.gains.iter()) {
        row *= g;
    }
    Ok(&basis.eigenvectors * spectrum)
}

/// Step response: gain 1 on indices `1..=k1`, `mid_gain` on `k1+1..=k2`, 0 above.
///
/// Indices are 1-based over ascending eigenvalues; index `k1` itself gets gain 1.
pub fn step_response(k1: usize, k2: usize, mid_gain: f64, n: usize) -> Result<FilterResponse> {
    if !(1 <= k1 && k1 <= k2 && k2 <= n) {
        return Err(Error::InvalidRange(format!("need 1 <= k1 <= k2 <= n, got k1={k1}, k2={k2}, n={n}")));
    }
    if !(0.0..=1.0).contains(&mid_gain) {
        return Err(Error::InvalidRange(format!("mid gain {mid_gain} outside [0, 1]")));
    }
    let gains = (1..=n)
        .map(|i| {
            if i <= k1 {
                1.0
            } else if i <= k2 {
                mid_gain
            } else {
                0.0
            }
        })
        .collect();
    FilterResponse::new(gains)
}

/// Keeps the `k` lowest frequencies and removes the rest.
pub fn ideal_lowpass_response(k: usize, n: usize) -> Result<FilterResponse> {
    if !(1 <= k && k <= n) {
        return Err(Error::InvalidRange(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    FilterResponse::new((0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect())
}

fn check_rows(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidMatrix(format!("expected a square matrix, got {}x{}", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite entry".into()));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax().max(1.0);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > SYMMETRY_TOL * scale {
                return Err(Error::InvalidMatrix(format!("not symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}
