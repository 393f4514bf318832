use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::EmbeddingSet;

/// Linear map from the D-dimensional latent space to its top-2 principal
/// plane, and back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    /// Two orthonormal rows of length D.
    pub components: [Vec<f64>; 2],
    /// Variance along each component (sample covariance eigenvalues).
    pub explained_variance: [f64; 2],
    /// Trace of the sample covariance.
    pub total_variance: f64,
}

impl Projection {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn explained_ratio(&self) -> f64 {
        (self.explained_variance[0] + self.explained_variance[1]) / self.total_variance
    }

    fn check_dim(&self, got: usize) -> Result<()> {
        if got != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got,
            });
        }
        Ok(())
    }

    /// `components · (v − mean)`
    pub fn project(&self, v: &[f64]) -> Result<[f64; 2]> {
        self.check_dim(v.len())?;
        let mut out = [0.0; 2];
        for (o, comp) in out.iter_mut().zip(&self.components) {
            *o = comp
                .iter()
                .zip(v.iter().zip(&self.mean))
                .map(|(c, (x, m))| c * (x - m))
                .sum();
        }
        Ok(out)
    }

    /// `mean + componentsᵀ · q`
    pub fn inverse_project(&self, q: [f64; 2]) -> Vec<f64> {
        self.mean
            .iter()
            .enumerate()
            .map(|(i, m)| m + self.components[0][i] * q[0] + self.components[1][i] * q[1])
            .collect()
    }

    pub fn project_all(&self, set: &EmbeddingSet) -> Result<Vec<[f64; 2]>> {
        set.vectors().iter().map(|v| self.project(v)).collect()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: Projection = serde_json::from_str(&text)?;
        if p.components.iter().any(|c| c.len() != p.mean.len()) {
            return Err(Error::DimensionMismatch {
                expected: p.mean.len(),
                got: p.components[0].len().max(p.components[1].len()),
            });
        }
        Ok(p)
    }
}

/// Fits the top-2 principal components of the mean-centered embeddings.
///
/// Each component is sign-normalized so that its largest-magnitude entry is
/// positive (first such entry on ties).
pub fn fit_pca(embeddings: &EmbeddingSet) -> Result<Projection> {
    let n = embeddings.len();
    let d = embeddings.dim();
    if n < 3 {
        return Err(Error::DegenerateEmbeddings(format!(
            "need at least 3 vectors, got {n}"
        )));
    }
    if d < 2 {
        return Err(Error::DegenerateEmbeddings(format!(
            "need at least 2 dimensions, got {d}"
        )));
    }
    let mean: Vec<f64> = (0..d)
        .map(|j| embeddings.vectors().iter().map(|v| v[j]).sum::<f64>() / n as f64)
        .collect();
    let centered = DMatrix::from_fn(n, d, |i, j| embeddings.vectors()[i][j] - mean[j]);
    let cov = (centered.transpose() * &centered) / (n - 1) as f64;
    let total_variance = cov.trace();

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let (l1, l2) = (eig.eigenvalues[order[0]], eig.eigenvalues[order[1]]);
    let scale = total_variance.abs().max(f64::MIN_POSITIVE);
    if l1 <= 1e-12 * scale || l2 <= 1e-10 * scale {
        return Err(Error::DegenerateEmbeddings(format!(
            "covariance rank below 2 (top eigenvalues {l1:.3e}, {l2:.3e})"
        )));
    }

    let component = |k: usize| -> Vec<f64> {
        let col = eig.eigenvectors.column(order[k]);
        let norm = col.norm();
        let mut v: Vec<f64> = col.iter().map(|x| x / norm).collect();
        let pivot = v
            .iter()
            .enumerate()
            .fold(0, |best, (i, x)| if x.abs() > v[best].abs() { i } else { best });
        if v[pivot] < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    };

    Ok(Projection {
        mean,
        components: [component(0), component(1)],
        explained_variance: [l1, l2],
        total_variance,
    })
}
