use std::fmt;
use std::str::FromStr;

use crate::scalar::Real;

use super::FrontendError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann, `0.5 - 0.5 cos(2 pi n / L)`.
    Hann,
    Rectangular,
}

impl FromStr for Window {
    type Err = FrontendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hann" => Ok(Window::Hann),
            "rect" | "rectangular" => Ok(Window::Rectangular),
            other => Err(FrontendError::InvalidConfig(format!("unknown window `{other}`"))),
        }
    }
}

impl fmt::Display for Window {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Window::Hann => "hann",
            Window::Rectangular => "rectangular",
        })
    }
}

/// Which feature chain to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrontendKind {
    Lfcc,
    Lfb,
    Spectrogram,
}

impl FrontendKind {
    pub fn name(self) -> &'static str {
        match self {
            FrontendKind::Lfcc => "lfcc",
            FrontendKind::Lfb => "lfb",
            FrontendKind::Spectrogram => "spec",
        }
    }
}

impl FromStr for FrontendKind {
    type Err = FrontendError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lfcc" => Ok(FrontendKind::Lfcc),
            "lfb" => Ok(FrontendKind::Lfb),
            "spec" | "spectrogram" => Ok(FrontendKind::Spectrogram),
            other => Err(FrontendError::InvalidConfig(format!("unknown front end `{other}`"))),
        }
    }
}

/// Short-time analysis settings shared by all front ends.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontendConfig<T> {
    pub frame_len_ms: T,
    pub frame_shift_ms: T,
    /// Transform length; must be a power of two.
    pub fft_bins: usize,
    pub n_channels: usize,
    pub n_ceps: usize,
    pub with_deltas: bool,
    /// Replace cepstral coefficient 0 with the log spectral energy of the frame.
    pub energy_c0: bool,
    pub log_floor: T,
    pub window: Window,
}

impl<T: Real> FrontendConfig<T> {
    fn base() -> Self {
        Self {
            frame_len_ms: T::lit(20.0),
            frame_shift_ms: T::lit(10.0),
            fft_bins: 512,
            n_channels: 20,
            n_ceps: 20,
            with_deltas: false,
            energy_c0: false,
            log_floor: T::lit(1e-30),
            window: Window::Hann,
        }
    }

    /// 20 linear channels, 20 cepstra with c0 replaced by log energy, plus
    /// deltas and delta-deltas: 60 dimensions.
    pub fn lfcc() -> Self {
        Self {
            with_deltas: true,
            energy_c0: true,
            ..Self::base()
        }
    }

    /// 60 linear log filterbank energies.
    pub fn lfb() -> Self {
        Self {
            n_channels: 60,
            n_ceps: 60,
            ..Self::base()
        }
    }

    /// Log power spectrum, `fft_bins / 2 + 1` dimensions.
    pub fn spectrogram() -> Self {
        Self::base()
    }

    pub fn for_kind(kind: FrontendKind) -> Self {
        match kind {
            FrontendKind::Lfcc => Self::lfcc(),
            FrontendKind::Lfb => Self::lfb(),
            FrontendKind::Spectrogram => Self::spectrogram(),
        }
    }

    pub fn n_bins(&self) -> usize {
        self.fft_bins / 2 + 1
    }

    /// Frame length and shift in samples at the given rate.
    pub fn frame_geometry(&self, sample_rate_hz: u32) -> Result<(usize, usize), FrontendError> {
        self.validate()?;
        if sample_rate_hz == 0 {
            return Err(FrontendError::InvalidConfig("sample rate must be positive".into()));
        }
        let sr = f64::from(sample_rate_hz);
        let len = (self.frame_len_ms.as_f64() * sr / 1000.0).round() as usize;
        let shift = (self.frame_shift_ms.as_f64() * sr / 1000.0).round() as usize;
        if len == 0 || shift == 0 {
            return Err(FrontendError::InvalidConfig(format!(
                "frame of {len} samples with shift {shift} at {sample_rate_hz} Hz"
            )));
        }
        if len > self.fft_bins {
            return Err(FrontendError::FrameTooLong {
                frame_len: len,
                fft_bins: self.fft_bins,
            });
        }
        Ok((len, shift))
    }

    pub fn validate(&self) -> Result<(), FrontendError> {
        let bad = |msg: String| Err(FrontendError::InvalidConfig(msg));
        if !(self.frame_len_ms > T::zero()) || !(self.frame_shift_ms > T::zero()) {
            return bad("frame length and shift must be positive".into());
        }
        if self.frame_shift_ms > self.frame_len_ms {
            return bad("frame shift exceeds frame length".into());
        }
        if self.fft_bins < 2 || !self.fft_bins.is_power_of_two() {
            return bad(format!("fft_bins = {} is not a power of two", self.fft_bins));
        }
        if self.n_channels == 0 {
            return bad("n_channels must be at least 1".into());
        }
        if self.n_ceps == 0 || self.n_ceps > self.n_channels {
            return bad(format!("n_ceps = {} must be in 1..={}", self.n_ceps, self.n_channels));
        }
        if !(self.log_floor > T::zero()) || !self.log_floor.is_finite() {
            return bad("log_floor must be positive".into());
        }
        Ok(())
    }

    /// Overlays `key = value` lines onto `self`. `#` starts a comment.
    pub fn apply_kv(mut self, text: &str) -> Result<Self, FrontendError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| FrontendError::InvalidConfig(format!("line {}: expected key=value", idx + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let err = |what: &str| FrontendError::InvalidConfig(format!("line {}: bad {what} `{value}`", idx + 1));
            let real = || value.parse::<f64>().map(T::lit).map_err(|_| err(key));
            let int = || value.parse::<usize>().map_err(|_| err(key));
            let flag = || match value {
                "1" | "true" | "on" | "yes" => Ok(true),
                "0" | "false" | "off" | "no" => Ok(false),
                _ => Err(err(key)),
            };
            match key {
                "frame_len_ms" => self.frame_len_ms = real()?,
                "frame_shift_ms" => self.frame_shift_ms = real()?,
                "fft_bins" => self.fft_bins = int()?,
                "n_channels" => self.n_channels = int()?,
                "n_ceps" => self.n_ceps = int()?,
                "with_deltas" => self.with_deltas = flag()?,
                "energy_c0" => self.energy_c0 = flag()?,
                "log_floor" => self.log_floor = real()?,
                "window" => self.window = value.parse()?,
                other => {
                    return Err(FrontendError::InvalidConfig(format!(
                        "line {}: unknown key `{other}`",
                        idx + 1
                    )))
                }
            }
        }
        self.validate()?;
        Ok(self)
    }

    /// Canonical `key=value` rendering, accepted back by [`apply_kv`](Self::apply_kv).
    pub fn to_kv(&self) -> String {
        format!(
            "frame_len_ms={:?}\nframe_shift_ms={:?}\nfft_bins={}\nn_channels={}\nn_ceps={}\nwith_deltas={}\nenergy_c0={}\nlog_floor={:?}\nwindow={}\n",
            self.frame_len_ms.as_f64(),
            self.frame_shift_ms.as_f64(),
            self.fft_bins,
            self.n_channels,
            self.n_ceps,
            self.with_deltas,
            self.energy_c0,
            self.log_floor.as_f64(),
            self.window,
        )
    }

    /// FNV-1a hash of the canonical rendering.
    pub fn config_hash(&self) -> u64 {
        self.to_kv().bytes().fold(0xcbf2_9ce4_8422_2325_u64, |h, b| {
            (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
        })
    }
}
