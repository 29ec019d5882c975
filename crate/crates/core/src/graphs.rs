//! Graph matrices that parameterize the subspace metric: identity, PCA
//! (scaled centering) and kNN Laplacian.
//!
//! The PCA graph folds its 1/N scale into the Laplacian so every graph feeds
//! the same `S_x = Xᵀ L X` code path downstream.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default neighbor count for the kNN graph.
pub const DEFAULT_KNN_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GraphKind {
    Identity,
    Pca,
    Knn,
}

/// N×N symmetric graph matrix tagged with its construction.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    pub values: DMatrix<f64>,
    pub kind: GraphKind,
}

impl LaplacianMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// Binary symmetric adjacency with zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjacencyMatrix {
    pub values: DMatrix<f64>,
}

impl AdjacencyMatrix {
    pub fn n(&self) -> usize {
        self.values.nrows()
    }
}

/// The identity graph: plain n×n identity.
pub fn identity_laplacian(n: usize) -> Result<LaplacianMatrix> {
    if n == 0 {
        return Err(Error::InvalidParam("graph size must be >= 1".into()));
    }
    Ok(LaplacianMatrix {
        values: DMatrix::identity(n, n),
        kind: GraphKind::Identity,
    })
}

/// The PCA graph (1/n)·(I − (1/n)·11ᵀ), so that Xᵀ·L·X is directly the
/// 1/n-scaled total scatter.
pub fn pca_laplacian(n: usize) -> Result<LaplacianMatrix> {
    if n == 0 {
        return Err(Error::InvalidParam("graph size must be >= 1".into()));
    }
    let values = crate::linalg::centering_matrix(n) / n as f64;
    Ok(LaplacianMatrix {
        values,
        kind: GraphKind::Pca,
    })
}

/// kNN adjacency by squared Euclidean distance with self excluded.
/// A_ij = 1 iff i is among j's k nearest or j among i's (OR rule).
/// Distance ties break toward the lower row index.
pub fn knn_adjacency(x: &DMatrix<f64>, k: usize) -> Result<AdjacencyMatrix> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidParam(format!(
            "kNN graph needs at least 2 rows, got {n}"
        )));
    }
    if k == 0 || k > n - 1 {
        return Err(Error::InvalidParam(format!(
            "k must satisfy 1 <= k <= N-1 (k={k}, N={n})"
        )));
    }
    let mut adj = DMatrix::zeros(n, n);
    for i in 0..n {
        let xi = x.row(i);
        let mut dists: Vec<(f64, usize)> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                let diff = xi - x.row(j);
                (diff.dot(&diff), j)
            })
            .collect();
        dists.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        for &(_, j) in dists.iter().take(k) {
            adj[(i, j)] = 1.0;
            adj[(j, i)] = 1.0;
        }
    }
    Ok(AdjacencyMatrix { values: adj })
}

/// L = D − A with D = diag(row sums of A).
pub fn knn_laplacian(adj: &AdjacencyMatrix) -> LaplacianMatrix {
    let n = adj.n();
    let mut lap = -adj.values.clone();
    for i in 0..n {
        lap[(i, i)] = adj.values.row(i).sum();
    }
    LaplacianMatrix {
        values: lap,
        kind: GraphKind::Knn,
    }
}

/// Convenience: build the configured graph for the given data.
pub fn build_laplacian(kind: GraphKind, x: &DMatrix<f64>, k: usize) -> Result<LaplacianMatrix> {
    match kind {
        GraphKind::Identity => identity_laplacian(x.nrows()),
        GraphKind::Pca => pca_laplacian(x.nrows()),
        GraphKind::Knn => Ok(knn_laplacian(&knn_adjacency(x, k)?)),
    }
}
