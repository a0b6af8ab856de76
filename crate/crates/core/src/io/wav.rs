use std::path::Path;

use crate::scalar::Real;

use super::TrialIoError;

const PCM16_SCALE: f64 = 32768.0;

/// Mono audio with amplitudes normalized to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    pub samples: Vec<T>,
    pub sample_rate_hz: u32,
}

impl<T: Real> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate_hz: u32) -> Self {
        Self {
            samples,
            sample_rate_hz,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }
}

fn map_hound(path: &Path, err: hound::Error) -> TrialIoError {
    match err {
        hound::Error::IoError(e) => TrialIoError::io(path, e),
        hound::Error::FormatError(msg) => TrialIoError::NotWav(format!("{}: {msg}", path.display())),
        hound::Error::Unsupported => TrialIoError::UnsupportedEncoding("unsupported WAVE feature".into()),
        hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
            TrialIoError::UnsupportedEncoding("sample format".into())
        }
        hound::Error::UnfinishedSample => TrialIoError::NotWav(format!("{}: truncated sample data", path.display())),
    }
}

/// Reads a RIFF/WAVE file holding 16-bit integer PCM mono audio. Samples are
/// scaled by `1/32768`.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Waveform<T>, TrialIoError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(TrialIoError::UnsupportedEncoding(format!(
            "{:?} {}-bit",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(TrialIoError::UnsupportedChannelCount(spec.channels));
    }
    if spec.sample_rate == 0 {
        return Err(TrialIoError::NotWav(format!("{}: zero sample rate", path.display())));
    }
    let scale = T::lit(PCM16_SCALE);
    let samples = reader
        .into_samples::<i16>()
        .map(|s| s.map(|v| T::lit(f64::from(v)) / scale))
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| map_hound(path, e))?;
    if samples.is_empty() {
        return Err(TrialIoError::EmptyAudio);
    }
    Ok(Waveform::new(samples, spec.sample_rate))
}

/// Writes a waveform as 16-bit PCM mono, rounding and saturating each sample.
pub fn write_wav_pcm16<T: Real>(path: impl AsRef<Path>, wave: &Waveform<T>) -> Result<(), TrialIoError> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| map_hound(path, e))?;
    for &s in &wave.samples {
        let v = (s.as_f64() * PCM16_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        writer.write_sample(v).map_err(|e| map_hound(path, e))?;
    }
    writer.finalize().map_err(|e| map_hound(path, e))
}
