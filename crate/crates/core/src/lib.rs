//! Voice presentation attack detection toolkit: linear-frequency front ends,
//! GMM and Mahalanobis-distance back ends, margin-based training criteria,
//! detection metrics and significance testing.
//!
//! The numeric code is generic over [`scalar::Real`] (`f32` or `f64`). The
//! aliases below fix the scalar for the common cases.

// `!(x > 0)` style checks are deliberate: NaN must fail them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod distance;
pub mod frontend;
pub mod gmm;
pub mod io;
pub mod loss;
pub mod metrics;
pub mod models;
pub mod scalar;

pub use analysis::{
    critical_z, fuse_scores, significance_matrix, z_statistic, AnalysisError, Correction, FusionSpec, RunSummary,
    SignificanceMatrix, ThresholdRule,
};
pub use distance::{fit_class_gaussian, mdistance_score, pool_utterance_embedding, DistanceError, PoolingMode};
pub use frontend::{extract, Frontend, FrontendConfig, FrontendError, FrontendKind, Window};
pub use gmm::{decide, em_fit, llr_score, Decision, EmOptions, GmmError};
pub use io::{FeatureMatrix, Key, ScoreSet, TrialEntry, TrialIoError, Waveform};
pub use loss::{margin_softmax, oc_softmax, p2sgrad_mse, vanilla_softmax_ce, LossError, MarginParams};
pub use metrics::{det_points, eer, frr_far, min_tdcf, probit_warp, LabeledScores, MetricsError, TdcfCosts};
pub use models::{ModelFile, ModelFileError};
pub use scalar::Real;

pub type WaveformF32 = io::Waveform<f32>;
pub type WaveformF64 = io::Waveform<f64>;
pub type FeatureMatrixF32 = io::FeatureMatrix<f32>;
pub type FeatureMatrixF64 = io::FeatureMatrix<f64>;
pub type ScoreSetF64 = io::ScoreSet<f64>;
pub type FrontendConfigF32 = frontend::FrontendConfig<f32>;
pub type FrontendConfigF64 = frontend::FrontendConfig<f64>;
pub type GmmF32 = gmm::Gmm<f32>;
pub type GmmF64 = gmm::Gmm<f64>;
pub type GmmPairF32 = gmm::GmmPair<f32>;
pub type GmmPairF64 = gmm::GmmPair<f64>;
pub type ClassGaussianF64 = distance::ClassGaussian<f64>;
pub type MdistModelF64 = distance::MdistModel<f64>;
pub type MarginParamsF64 = loss::MarginParams<f64>;
pub type LabeledScoresF64 = metrics::LabeledScores<f64>;
pub type TdcfCostsF64 = metrics::TdcfCosts<f64>;
pub type SignificanceMatrixF64 = analysis::SignificanceMatrix<f64>;
pub type ModelFileF64 = models::ModelFile<f64>;
