//! Linear-frequency DSP front ends: log power spectrogram, linear filterbank
//! energies (LFB) and linear-frequency cepstral coefficients (LFCC).
//!
//! Every chain starts from the same windowed short-time power spectrum:
//!
//! ```text
//! frame -> window -> zero-pad -> |FFT|^2 -> [W_fb ·] -> log(max(·, floor)) -> [DCT-II] -> [Δ, Δ²]
//! ```
//!
//! There is no pre-emphasis, dithering or feature normalization.

mod config;
mod deltas;
mod spectral;

use thiserror::Error;

use crate::io::{FeatureMatrix, FeatureMeta, TrialIoError, Waveform};
use crate::scalar::Real;

pub use config::{FrontendConfig, FrontendKind, Window};
pub use deltas::{append_deltas, delta_rows};
pub use spectral::{
    dct_matrix, frame_signal, linear_filterbank, power_spectrum, window_coefficients, Filterbank, PowerSpectrum,
};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("invalid front-end configuration: {0}")]
    InvalidConfig(String),
    #[error("frame of {frame_len} samples does not fit a {fft_bins}-point transform")]
    FrameTooLong { frame_len: usize, fft_bins: usize },
    #[error("waveform has no samples")]
    EmptyWaveform,
    #[error(transparent)]
    Matrix(#[from] TrialIoError),
}

/// A front end with its window, filterbank, DCT basis and transform plan
/// prepared for one sample rate.
pub struct Frontend<T: Real> {
    kind: FrontendKind,
    cfg: FrontendConfig<T>,
    sample_rate_hz: u32,
    frame_len: usize,
    frame_shift: usize,
    spectrum: PowerSpectrum<T>,
    filterbank: Option<Filterbank<T>>,
    dct: Option<Vec<Vec<T>>>,
}

impl<T: Real> Frontend<T> {
    pub fn new(kind: FrontendKind, cfg: FrontendConfig<T>, sample_rate_hz: u32) -> Result<Self, FrontendError> {
        let (frame_len, frame_shift) = cfg.frame_geometry(sample_rate_hz)?;
        let spectrum = PowerSpectrum::new(cfg.window, frame_len, cfg.fft_bins)?;
        let filterbank = match kind {
            FrontendKind::Spectrogram => None,
            _ => Some(linear_filterbank(&cfg)?),
        };
        let dct = match kind {
            FrontendKind::Lfcc => Some(dct_matrix(cfg.n_ceps, cfg.n_channels)),
            _ => None,
        };
        Ok(Self {
            kind,
            cfg,
            sample_rate_hz,
            frame_len,
            frame_shift,
            spectrum,
            filterbank,
            dct,
        })
    }

    pub fn kind(&self) -> FrontendKind {
        self.kind
    }

    pub fn config(&self) -> &FrontendConfig<T> {
        &self.cfg
    }

    /// Output dimension per frame.
    pub fn dim(&self) -> usize {
        let base = match self.kind {
            FrontendKind::Lfcc => self.cfg.n_ceps,
            FrontendKind::Lfb => self.cfg.n_channels,
            FrontendKind::Spectrogram => self.cfg.n_bins(),
        };
        if self.cfg.with_deltas {
            3 * base
        } else {
            base
        }
    }

    fn static_frame(&self, frame: &[T]) -> Result<Vec<T>, FrontendError> {
        let floor = self.cfg.log_floor;
        let safe_log = |v: T| if v > floor { v.ln() } else { floor.ln() };
        let power = self.spectrum.compute(frame)?;
        let Some(fb) = &self.filterbank else {
            return Ok(power.into_iter().map(safe_log).collect());
        };
        let log_fb: Vec<T> = fb.apply(&power).into_iter().map(safe_log).collect();
        let Some(dct) = &self.dct else {
            return Ok(log_fb);
        };
        let mut ceps: Vec<T> = dct
            .iter()
            .map(|basis| basis.iter().zip(&log_fb).map(|(&b, &x)| b * x).sum())
            .collect();
        if self.cfg.energy_c0 {
            ceps[0] = safe_log(power.iter().copied().sum());
        }
        Ok(ceps)
    }

    pub fn extract(&self, wave: &Waveform<T>) -> Result<FeatureMatrix<T>, FrontendError> {
        if wave.is_empty() {
            return Err(FrontendError::EmptyWaveform);
        }
        if wave.sample_rate_hz != self.sample_rate_hz {
            return Err(FrontendError::InvalidConfig(format!(
                "front end prepared for {} Hz, waveform is {} Hz",
                self.sample_rate_hz, wave.sample_rate_hz
            )));
        }
        let frames = spectral::split_frames(&wave.samples, self.frame_len, self.frame_shift);
        let rows = frames
            .iter()
            .map(|f| self.static_frame(f))
            .collect::<Result<Vec<_>, _>>()?;
        let statics = FeatureMatrix::from_rows(&rows)?;
        let out = if self.cfg.with_deltas {
            append_deltas(&statics)?
        } else {
            statics
        };
        Ok(out.with_meta(FeatureMeta {
            frontend: self.kind.name().to_string(),
            config_hash: self.cfg.config_hash(),
        }))
    }
}

pub fn extract<T: Real>(
    kind: FrontendKind,
    wave: &Waveform<T>,
    cfg: &FrontendConfig<T>,
) -> Result<FeatureMatrix<T>, FrontendError> {
    Frontend::new(kind, cfg.clone(), wave.sample_rate_hz)?.extract(wave)
}

pub fn extract_lfcc<T: Real>(wave: &Waveform<T>, cfg: &FrontendConfig<T>) -> Result<FeatureMatrix<T>, FrontendError> {
    extract(FrontendKind::Lfcc, wave, cfg)
}

pub fn extract_lfb<T: Real>(wave: &Waveform<T>, cfg: &FrontendConfig<T>) -> Result<FeatureMatrix<T>, FrontendError> {
    extract(FrontendKind::Lfb, wave, cfg)
}

pub fn extract_spectrogram<T: Real>(
    wave: &Waveform<T>,
    cfg: &FrontendConfig<T>,
) -> Result<FeatureMatrix<T>, FrontendError> {
    extract(FrontendKind::Spectrogram, wave, cfg)
}
