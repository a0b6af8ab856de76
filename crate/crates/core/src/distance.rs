//! Single-Gaussian class models over utterance embeddings, scored by the
//! negative (halved) Mahalanobis distance
//! `s_c = -½ (a - μ_c)ᵀ Σ_c⁻¹ (a - μ_c)`.
//!
//! The quadratic form is evaluated through a Cholesky factor; the covariance
//! is never inverted explicitly. The detection score is the bona fide class
//! score.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::io::FeatureMatrix;
use crate::scalar::Real;

#[derive(Debug, Error, PartialEq)]
pub enum DistanceError {
    #[error("need at least 2 embeddings, got {0}")]
    TooFewEmbeddings(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("covariance is not symmetric")]
    NotSymmetric,
    #[error("covariance is not positive definite")]
    NotPositiveDefinite,
    #[error("invalid input: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolingMode {
    /// Per-dimension average over frames.
    Mean,
    /// Average followed by the population standard deviation (2D values).
    MeanStd,
}

impl FromStr for PoolingMode {
    type Err = DistanceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(PoolingMode::Mean),
            "meanstd" | "mean-std" | "mean_std" => Ok(PoolingMode::MeanStd),
            other => Err(DistanceError::Invalid(format!("unknown pooling mode `{other}`"))),
        }
    }
}

impl fmt::Display for PoolingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PoolingMode::Mean => "mean",
            PoolingMode::MeanStd => "meanstd",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceEmbedding<T> {
    pub vector: Vec<T>,
}

impl<T: Real> UtteranceEmbedding<T> {
    pub fn new(vector: Vec<T>) -> Self {
        Self { vector }
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

pub fn pool_utterance_embedding<T: Real>(feats: &FeatureMatrix<T>, mode: PoolingMode) -> UtteranceEmbedding<T> {
    let d = feats.cols();
    let n = T::from_count(feats.rows());
    let mut mean = vec![T::zero(); d];
    for row in feats.iter_rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m = *m + x;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    if mode == PoolingMode::Mean {
        return UtteranceEmbedding::new(mean);
    }
    let mut var = vec![T::zero(); d];
    for row in feats.iter_rows() {
        for k in 0..d {
            let diff = row[k] - mean[k];
            var[k] = var[k] + diff * diff;
        }
    }
    mean.extend(var.into_iter().map(|v| (v / n).sqrt()));
    UtteranceEmbedding::new(mean)
}

/// Lower-triangular `L` with `L Lᵀ = a` for a symmetric positive-definite `a`
/// (row-major, `n x n`).
pub fn cholesky<T: Real>(a: &[T], n: usize) -> Result<Vec<T>, DistanceError> {
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum = sum - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > T::zero()) || !sum.is_finite() {
                    return Err(DistanceError::NotPositiveDefinite);
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L x = b` for lower-triangular `L`.
fn forward_substitute<T: Real>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut x = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i * n + k] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Gaussian class model `{μ, Σ}` with its Cholesky factor cached.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassGaussian<T> {
    mean: Vec<T>,
    cov: Vec<T>,
    chol: Vec<T>,
    pub label: Option<String>,
}

impl<T: Real> ClassGaussian<T> {
    /// `cov` is `D x D` row-major, symmetric to within `1e-12` absolute.
    pub fn new(mean: Vec<T>, cov: Vec<T>) -> Result<Self, DistanceError> {
        let d = mean.len();
        if d == 0 {
            return Err(DistanceError::Invalid("empty mean".into()));
        }
        if cov.len() != d * d {
            return Err(DistanceError::DimensionMismatch {
                expected: d * d,
                found: cov.len(),
            });
        }
        let tol = T::lit(1e-12);
        for i in 0..d {
            for j in 0..i {
                if (cov[i * d + j] - cov[j * d + i]).abs() > tol {
                    return Err(DistanceError::NotSymmetric);
                }
            }
        }
        let chol = cholesky(&cov, d)?;
        Ok(Self {
            mean,
            cov,
            chol,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &[T] {
        &self.cov
    }

    pub fn cholesky_factor(&self) -> &[T] {
        &self.chol
    }
}

/// Sample mean and population covariance, regularized by
/// `ridge * trace(Σ) / D * I`. When the covariance is exactly zero the
/// regularizer falls back to `ridge * I`.
pub fn fit_class_gaussian<T: Real>(
    embeddings: &[UtteranceEmbedding<T>],
    ridge: T,
) -> Result<ClassGaussian<T>, DistanceError> {
    if embeddings.len() < 2 {
        return Err(DistanceError::TooFewEmbeddings(embeddings.len()));
    }
    if !(ridge >= T::zero()) {
        return Err(DistanceError::Invalid("ridge must be non-negative".into()));
    }
    let d = embeddings[0].dim();
    if let Some(bad) = embeddings.iter().find(|e| e.dim() != d) {
        return Err(DistanceError::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        });
    }
    let n = T::from_count(embeddings.len());
    let mut mean = vec![T::zero(); d];
    for e in embeddings {
        for (m, &x) in mean.iter_mut().zip(&e.vector) {
            *m = *m + x;
        }
    }
    for m in &mut mean {
        *m = *m / n;
    }
    let mut cov = vec![T::zero(); d * d];
    for e in embeddings {
        for i in 0..d {
            let di = e.vector[i] - mean[i];
            for j in 0..=i {
                cov[i * d + j] = cov[i * d + j] + di * (e.vector[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in 0..=i {
            let v = cov[i * d + j] / n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    let trace: T = (0..d).map(|i| cov[i * d + i]).sum();
    let scale = if trace > T::zero() {
        trace / T::from_count(d)
    } else {
        T::one()
    };
    for i in 0..d {
        cov[i * d + i] = cov[i * d + i] + ridge * scale;
    }
    ClassGaussian::new(mean, cov)
}

/// `-½ (e - μ)ᵀ Σ⁻¹ (e - μ)` via the Cholesky factor.
pub fn mdistance_score<T: Real>(g: &ClassGaussian<T>, e: &UtteranceEmbedding<T>) -> Result<T, DistanceError> {
    let d = g.dim();
    if e.dim() != d {
        return Err(DistanceError::DimensionMismatch {
            expected: d,
            found: e.dim(),
        });
    }
    let diff: Vec<T> = e.vector.iter().zip(&g.mean).map(|(&a, &m)| a - m).collect();
    let z = forward_substitute(&g.chol, d, &diff);
    let q: T = z.iter().map(|&v| v * v).sum();
    Ok(-T::lit(0.5) * q)
}

/// Bona fide and spoof class Gaussians plus the pooling that produced their
/// training embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct MdistModel<T> {
    pub bona: ClassGaussian<T>,
    pub spoof: ClassGaussian<T>,
    pub pooling: PoolingMode,
}

impl<T: Real> MdistModel<T> {
    pub fn new(bona: ClassGaussian<T>, spoof: ClassGaussian<T>, pooling: PoolingMode) -> Result<Self, DistanceError> {
        if bona.dim() != spoof.dim() {
            return Err(DistanceError::DimensionMismatch {
                expected: bona.dim(),
                found: spoof.dim(),
            });
        }
        Ok(Self { bona, spoof, pooling })
    }

    /// Detection score of a trial: the bona fide class score.
    pub fn score(&self, feats: &FeatureMatrix<T>) -> Result<T, DistanceError> {
        mdistance_score(&self.bona, &pool_utterance_embedding(feats, self.pooling))
    }
}
