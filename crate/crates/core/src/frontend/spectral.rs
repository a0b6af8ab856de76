use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

use crate::io::Waveform;
use crate::scalar::Real;

use super::config::{FrontendConfig, Window};
use super::FrontendError;

/// Splits a waveform into frames of `frame_len` samples, hopping by `shift`.
///
/// Frame `n` starts at `n * shift`; there are `1 + (T - L) / shift` frames
/// when `T >= L`, otherwise a single zero-padded frame.
pub fn frame_signal<T: Real>(wave: &Waveform<T>, cfg: &FrontendConfig<T>) -> Result<Vec<Vec<T>>, FrontendError> {
    if wave.is_empty() {
        return Err(FrontendError::EmptyWaveform);
    }
    let (len, shift) = cfg.frame_geometry(wave.sample_rate_hz)?;
    Ok(split_frames(&wave.samples, len, shift))
}

pub(crate) fn split_frames<T: Real>(samples: &[T], len: usize, shift: usize) -> Vec<Vec<T>> {
    let total = samples.len();
    let count = if total >= len { 1 + (total - len) / shift } else { 1 };
    (0..count)
        .map(|n| {
            let start = n * shift;
            let end = (start + len).min(total);
            let mut frame = samples[start..end].to_vec();
            frame.resize(len, T::zero());
            frame
        })
        .collect()
}

pub fn window_coefficients<T: Real>(window: Window, len: usize) -> Vec<T> {
    match window {
        Window::Rectangular => vec![T::one(); len],
        Window::Hann => {
            let two_pi = T::lit(2.0) * T::PI();
            let l = T::from_count(len);
            let half = T::lit(0.5);
            (0..len)
                .map(|n| half - half * (two_pi * T::from_count(n) / l).cos())
                .collect()
        }
    }
}

/// Windowed, zero-padded power spectrum with a cached transform plan.
pub struct PowerSpectrum<T: Real> {
    fft: Arc<dyn Fft<T>>,
    fft_bins: usize,
    window: Vec<T>,
}

impl<T: Real> PowerSpectrum<T> {
    pub fn new(window: Window, frame_len: usize, fft_bins: usize) -> Result<Self, FrontendError> {
        if fft_bins < 2 || !fft_bins.is_power_of_two() {
            return Err(FrontendError::InvalidConfig(format!(
                "fft_bins = {fft_bins} is not a power of two"
            )));
        }
        if frame_len > fft_bins {
            return Err(FrontendError::FrameTooLong { frame_len, fft_bins });
        }
        let fft = FftPlanner::new().plan_fft_forward(fft_bins);
        Ok(Self {
            fft,
            fft_bins,
            window: window_coefficients(window, frame_len),
        })
    }

    /// Returns `fft_bins / 2 + 1` squared magnitudes.
    pub fn compute(&self, frame: &[T]) -> Result<Vec<T>, FrontendError> {
        if frame.len() != self.window.len() {
            return Err(FrontendError::FrameTooLong {
                frame_len: frame.len(),
                fft_bins: self.window.len(),
            });
        }
        let mut buf: Vec<Complex<T>> = frame
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex::new(x * w, T::zero()))
            .collect();
        buf.resize(self.fft_bins, Complex::new(T::zero(), T::zero()));
        self.fft.process(&mut buf);
        Ok(buf[..self.fft_bins / 2 + 1].iter().map(|c| c.norm_sqr()).collect())
    }
}

/// One-shot power spectrum of a single frame under `cfg`'s window and
/// transform length.
pub fn power_spectrum<T: Real>(frame: &[T], cfg: &FrontendConfig<T>) -> Result<Vec<T>, FrontendError> {
    PowerSpectrum::new(cfg.window, frame.len(), cfg.fft_bins)?.compute(frame)
}

/// Triangular filters with unit peaks, centers linearly spaced over
/// `(0, Nyquist)` and snapped to the bin grid.
///
/// Filter edges are the `n_channels + 2` points `i * Nyquist / (n_channels + 1)`
/// rounded to the nearest bin; the outermost edges sit on bin 0 and the Nyquist
/// bin, so no triangle is clipped.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank<T> {
    n_channels: usize,
    n_bins: usize,
    weights: Vec<T>,
    edges: Vec<usize>,
}

impl<T: Real> Filterbank<T> {
    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_bins(&self) -> usize {
        self.n_bins
    }

    pub fn row(&self, channel: usize) -> &[T] {
        &self.weights[channel * self.n_bins..(channel + 1) * self.n_bins]
    }

    pub fn center_bin(&self, channel: usize) -> usize {
        self.edges[channel + 1]
    }

    pub fn center_hz(&self, channel: usize, sample_rate_hz: u32) -> f64 {
        let fft_bins = (self.n_bins - 1) * 2;
        self.center_bin(channel) as f64 * f64::from(sample_rate_hz) / fft_bins as f64
    }

    /// `W_fb · power`.
    pub fn apply(&self, power: &[T]) -> Vec<T> {
        debug_assert_eq!(power.len(), self.n_bins);
        (0..self.n_channels)
            .map(|c| self.row(c).iter().zip(power).map(|(&w, &p)| w * p).sum())
            .collect()
    }
}

pub fn linear_filterbank<T: Real>(cfg: &FrontendConfig<T>) -> Result<Filterbank<T>, FrontendError> {
    cfg.validate()?;
    let n_bins = cfg.n_bins();
    let half = cfg.fft_bins / 2;
    let edges: Vec<usize> = (0..cfg.n_channels + 2)
        .map(|i| ((i * half) as f64 / (cfg.n_channels + 1) as f64).round() as usize)
        .collect();
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FrontendError::InvalidConfig(format!(
            "{} channels do not fit on {} bins",
            cfg.n_channels, n_bins
        )));
    }
    let mut weights = vec![T::zero(); cfg.n_channels * n_bins];
    for c in 0..cfg.n_channels {
        let (lo, mid, hi) = (edges[c], edges[c + 1], edges[c + 2]);
        let row = &mut weights[c * n_bins..(c + 1) * n_bins];
        for (b, w) in row.iter_mut().enumerate().take(hi + 1).skip(lo) {
            *w = if b <= mid {
                T::from_count(b - lo) / T::from_count(mid - lo)
            } else {
                T::from_count(hi - b) / T::from_count(hi - mid)
            };
        }
    }
    Ok(Filterbank {
        n_channels: cfg.n_channels,
        n_bins,
        weights,
        edges,
    })
}

/// Orthonormal DCT-II basis: `n_out` rows over `n_in` inputs.
pub fn dct_matrix<T: Real>(n_out: usize, n_in: usize) -> Vec<Vec<T>> {
    let n = T::from_count(n_in);
    let s0 = (T::one() / n).sqrt();
    let sk = (T::lit(2.0) / n).sqrt();
    (0..n_out)
        .map(|k| {
            let scale = if k == 0 { s0 } else { sk };
            (0..n_in)
                .map(|i| {
                    let arg = T::PI() * T::from_count(k) * T::from_count(2 * i + 1) / (T::lit(2.0) * n);
                    scale * arg.cos()
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_rect(fft: usize) -> FrontendConfig<f64> {
        FrontendConfig {
            fft_bins: fft,
            window: Window::Rectangular,
            ..FrontendConfig::spectrogram()
        }
    }

    #[test]
    fn frame_counts_at_boundaries() {
        let cfg = FrontendConfig::<f64>::spectrogram();
        let count = |t: usize| frame_signal(&Waveform::new(vec![0.1; t], 16000), &cfg).unwrap().len();
        assert_eq!(count(320), 1);
        assert_eq!(count(480), 2);
        assert_eq!(count(479), 1);
        assert_eq!(count(16000), 99);
    }

    #[test]
    fn short_signal_is_zero_padded() {
        let cfg = FrontendConfig::<f64>::spectrogram();
        let frames = frame_signal(&Waveform::new(vec![1.0; 100], 16000), &cfg).unwrap();
        assert_eq!(frames.len(), 1);
        assert_eq!(frames[0].len(), 320);
        assert!(frames[0][..100].iter().all(|&v| v == 1.0));
        assert!(frames[0][100..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn frames_start_at_multiples_of_shift() {
        let cfg = FrontendConfig::<f64>::spectrogram();
        let samples: Vec<f64> = (0..1000).map(|i| i as f64 / 1000.0).collect();
        let frames = frame_signal(&Waveform::new(samples.clone(), 16000), &cfg).unwrap();
        for (n, f) in frames.iter().enumerate() {
            assert_eq!(f[0], samples[n * 160]);
        }
        assert!(frame_signal(&Waveform::<f64>::new(vec![], 16000), &cfg).is_err());
    }

    #[test]
    fn dc_frame_has_all_power_in_bin_zero() {
        let p = power_spectrum(&[1.0_f64; 64], &cfg_rect(64)).unwrap();
        assert_eq!(p.len(), 33);
        assert!((p[0] - 4096.0).abs() < 1e-9);
        assert!(p[1..].iter().all(|&v| v.abs() < 1e-18));
    }

    #[test]
    fn frame_longer_than_transform_is_rejected() {
        assert!(matches!(
            power_spectrum(&[0.0_f64; 65], &cfg_rect(64)),
            Err(FrontendError::FrameTooLong {
                frame_len: 65,
                fft_bins: 64
            })
        ));
    }

    #[test]
    fn hann_window_is_periodic() {
        let w: Vec<f64> = window_coefficients(Window::Hann, 4);
        let expect = [0.0, 0.5, 1.0, 0.5];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn filterbank_rows_peak_once_at_one() {
        for cfg in [FrontendConfig::<f64>::lfcc(), FrontendConfig::lfb()] {
            let fb = linear_filterbank(&cfg).unwrap();
            assert_eq!(fb.n_bins(), 257);
            for c in 0..fb.n_channels() {
                let row = fb.row(c);
                let max = row.iter().copied().fold(f64::MIN, f64::max);
                assert_eq!(max, 1.0);
                assert_eq!(row.iter().filter(|&&v| v == max).count(), 1);
                assert_eq!(row[fb.center_bin(c)], 1.0);
                assert!(row.iter().all(|&v| v >= 0.0));
                // support overlaps only the neighbors
                for other in 0..fb.n_channels() {
                    if other + 1 < c || other > c + 1 {
                        assert!(row.iter().zip(fb.row(other)).all(|(a, b)| a * b == 0.0));
                    }
                }
            }
            for b in 0..fb.n_bins() {
                let col: f64 = (0..fb.n_channels()).map(|c| fb.row(c)[b]).sum();
                assert!(col <= 2.0 + 1e-12);
            }
        }
    }

    #[test]
    fn too_many_channels_is_an_error() {
        let cfg = FrontendConfig::<f64> {
            fft_bins: 16,
            n_channels: 12,
            n_ceps: 12,
            frame_len_ms: 1.0,
            frame_shift_ms: 0.5,
            ..FrontendConfig::lfb()
        };
        assert!(linear_filterbank(&cfg).is_err());
    }

    #[test]
    fn dct_is_orthonormal() {
        let m: Vec<Vec<f64>> = dct_matrix(20, 20);
        for i in 0..20 {
            for j in 0..20 {
                let dot: f64 = m[i].iter().zip(&m[j]).map(|(a, b)| a * b).sum();
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((dot - target).abs() < 1e-12, "{i} {j} {dot}");
            }
        }
    }
}
