//! Diagonal-covariance GMM back end.
//!
//! One mixture per class is trained by maximum likelihood (EM with binary
//! splitting), and a trial is scored by the log-likelihood ratio
//! `log p(a_1:N | bona) - log p(a_1:N | spoof)`. Frames are treated as
//! independent, so a trial's log-likelihood is the sum over its frames.

mod em;

use thiserror::Error;

use crate::io::FeatureMatrix;
use crate::scalar::{log_sum_exp, Real};

pub use em::{em_fit, em_fit_traced, EmOptions, EmTrace};

#[derive(Debug, Error, PartialEq)]
pub enum GmmError {
    #[error("{frames} frames cannot support {components} components")]
    TooFewFrames { frames: usize, components: usize },
    #[error("training data has zero variance in every dimension")]
    DegenerateData,
    #[error("dimension mismatch: model has {expected}, input has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

/// Mixture of `M` diagonal Gaussians over `D` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct Gmm<T> {
    dim: usize,
    weights: Vec<T>,
    means: Vec<T>,
    variances: Vec<T>,
    pub label: Option<String>,
}

impl<T: Real> Gmm<T> {
    /// `means` and `variances` are `M x D` row-major.
    pub fn new(weights: Vec<T>, means: Vec<T>, variances: Vec<T>, dim: usize) -> Result<Self, GmmError> {
        let m = weights.len();
        if m == 0 || dim == 0 {
            return Err(GmmError::InvalidModel(
                "need at least one component and one dimension".into(),
            ));
        }
        if means.len() != m * dim || variances.len() != m * dim {
            return Err(GmmError::InvalidModel(format!(
                "{m} components x {dim} dims needs {} means/variances",
                m * dim
            )));
        }
        if weights.iter().any(|&w| !(w >= T::zero()) || !w.is_finite()) {
            return Err(GmmError::InvalidModel("weights must be finite and non-negative".into()));
        }
        let total: T = weights.iter().copied().sum();
        if (total - T::one()).abs() > T::lit(1e-9) {
            return Err(GmmError::InvalidModel(format!("weights sum to {total}")));
        }
        if means.iter().any(|v| !v.is_finite()) {
            return Err(GmmError::InvalidModel("non-finite mean".into()));
        }
        if variances.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(GmmError::InvalidModel("variances must be positive".into()));
        }
        Ok(Self {
            dim,
            weights,
            means,
            variances,
            label: None,
        })
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[T] {
        &self.means
    }

    pub fn variances(&self) -> &[T] {
        &self.variances
    }

    pub fn mean(&self, m: usize) -> &[T] {
        &self.means[m * self.dim..(m + 1) * self.dim]
    }

    pub fn variance(&self, m: usize) -> &[T] {
        &self.variances[m * self.dim..(m + 1) * self.dim]
    }

    /// `log π_m - ½ Σ_d log(2π σ²_md)` per component.
    pub(crate) fn log_normalizers(&self) -> Vec<T> {
        let two_pi = T::lit(2.0) * T::PI();
        let half = T::lit(0.5);
        (0..self.n_components())
            .map(|m| {
                let log_det: T = self.variance(m).iter().map(|&v| (two_pi * v).ln()).sum();
                self.weights[m].ln() - half * log_det
            })
            .collect()
    }

    /// Per-component joint log densities `log π_m N(x; μ_m, σ²_m)` written into `out`.
    pub(crate) fn component_log_densities(&self, log_norm: &[T], frame: &[T], out: &mut [T]) {
        let half = T::lit(0.5);
        for (m, slot) in out.iter_mut().enumerate() {
            let mu = self.mean(m);
            let var = self.variance(m);
            let mut q = T::zero();
            for d in 0..self.dim {
                let diff = frame[d] - mu[d];
                q = q + diff * diff / var[d];
            }
            *slot = log_norm[m] - half * q;
        }
    }

    /// `log Σ_m π_m N(x; μ_m, σ²_m)` for one frame.
    pub fn frame_log_likelihood(&self, frame: &[T]) -> Result<T, GmmError> {
        self.check_dim(frame.len())?;
        let log_norm = self.log_normalizers();
        let mut buf = vec![T::zero(); self.n_components()];
        self.component_log_densities(&log_norm, frame, &mut buf);
        Ok(log_sum_exp(&buf))
    }

    /// Total log-likelihood of all frames, `Σ_n log Σ_m π_m N(a_n; μ_m, σ²_m)`.
    pub fn log_likelihood(&self, feats: &FeatureMatrix<T>) -> Result<T, GmmError> {
        self.check_dim(feats.cols())?;
        let log_norm = self.log_normalizers();
        let mut buf = vec![T::zero(); self.n_components()];
        let mut total = T::zero();
        for frame in feats.iter_rows() {
            self.component_log_densities(&log_norm, frame, &mut buf);
            total = total + log_sum_exp(&buf);
        }
        Ok(total)
    }

    pub fn average_log_likelihood(&self, feats: &FeatureMatrix<T>) -> Result<T, GmmError> {
        Ok(self.log_likelihood(feats)? / T::from_count(feats.rows()))
    }

    fn check_dim(&self, found: usize) -> Result<(), GmmError> {
        if found != self.dim {
            return Err(GmmError::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

/// Bona fide and spoof hypotheses over a shared feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct GmmPair<T> {
    pub bona: Gmm<T>,
    pub spoof: Gmm<T>,
}

impl<T: Real> GmmPair<T> {
    pub fn new(bona: Gmm<T>, spoof: Gmm<T>) -> Result<Self, GmmError> {
        if bona.dim() != spoof.dim() {
            return Err(GmmError::DimensionMismatch {
                expected: bona.dim(),
                found: spoof.dim(),
            });
        }
        Ok(Self { bona, spoof })
    }

    pub fn dim(&self) -> usize {
        self.bona.dim()
    }

    pub fn swapped(&self) -> Self {
        Self {
            bona: self.spoof.clone(),
            spoof: self.bona.clone(),
        }
    }
}

/// Log-likelihood ratio; higher means more bona fide.
pub fn llr_score<T: Real>(pair: &GmmPair<T>, feats: &FeatureMatrix<T>) -> Result<T, GmmError> {
    Ok(pair.bona.log_likelihood(feats)? - pair.spoof.log_likelihood(feats)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    AcceptBonaFide,
    RejectAsSpoof,
}

/// Accepts the bona fide hypothesis iff `score >= threshold`.
pub fn decide<T: Real>(score: T, threshold: T) -> Decision {
    if score >= threshold {
        Decision::AcceptBonaFide
    } else {
        Decision::RejectAsSpoof
    }
}
