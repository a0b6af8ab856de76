//! On-disk formats: PCM16 WAV input, trial protocols, two-column score files
//! and the `PADF` binary feature container.

mod features;
mod protocol;
mod scores;
mod wav;

use std::path::PathBuf;

use thiserror::Error;

pub use features::{read_features, write_features, FeatureMatrix, FeatureMeta, PADF_MAGIC, PADF_VERSION};
pub use protocol::{format_protocol_line, parse_protocol, parse_protocol_str, Key, TrialEntry};
pub use scores::{format_scores, parse_scores_str, read_scores, write_scores, ScoreSet};
pub use wav::{read_wav, write_wav_pcm16, Waveform};

#[derive(Debug, Error)]
pub enum TrialIoError {
    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a RIFF/WAVE file: {0}")]
    NotWav(String),
    #[error("unsupported encoding: {0} (only 16-bit integer PCM is accepted)")]
    UnsupportedEncoding(String),
    #[error("unsupported channel count {0} (only mono is accepted)")]
    UnsupportedChannelCount(u16),
    #[error("audio contains no samples")]
    EmptyAudio,
    #[error("line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("line {line}: unknown key `{key}` (expected `bonafide` or `spoof`)")]
    UnknownKey { line: usize, key: String },
    #[error("duplicate trial id `{0}`")]
    DuplicateTrialId(String),
    #[error("line {line}: score is not finite")]
    NonFiniteScore { line: usize },
    #[error("bad magic bytes (expected `PADF`)")]
    BadMagic,
    #[error("unsupported feature file version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated: expected {expected} bytes, found {actual}")]
    TruncatedFile { expected: u64, actual: u64 },
    #[error("{0} unexpected trailing bytes after payload")]
    TrailingData(u64),
    #[error("matrix dimensions overflow the addressable size")]
    DimensionOverflow,
    #[error("invalid feature matrix: {0}")]
    InvalidMatrix(String),
}

impl TrialIoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TrialIoError::Io {
            path: path.into(),
            source,
        }
    }
}
