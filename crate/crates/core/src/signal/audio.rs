use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Sample rate of every WAV file read or written.
pub const WAV_SAMPLE_RATE: u32 = 16_000;

const PCM16_SCALE: f64 = 32768.0;

/// Mono time-domain signal.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Real> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be > 0".into()));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {i}")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn zeros(len: usize, sample_rate: u32) -> Self {
        Self {
            samples: vec![T::zero(); len],
            sample_rate: sample_rate.max(1),
        }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn energy(&self) -> T {
        self.samples.iter().map(|&v| v * v).sum()
    }

    pub fn norm(&self) -> T {
        self.energy().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.check_compatible(other)?;
        Ok(self.samples.iter().zip(&other.samples).map(|(&a, &b)| a * b).sum())
    }

    pub fn scale(&self, a: T) -> Self {
        Self {
            samples: self.samples.iter().map(|&v| v * a).collect(),
            sample_rate: self.sample_rate,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    /// `self + a·other`.
    pub fn add_scaled(&self, a: T, other: &Self) -> Result<Self> {
        self.zip_with(other, |x, y| x + a * y)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_compatible(other)?;
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            sample_rate: self.sample_rate,
        })
    }

    /// Errors unless lengths and sample rates agree.
    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::Shape(format!(
                "audio lengths differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        if self.sample_rate != other.sample_rate {
            return Err(Error::Shape(format!(
                "sample rates differ: {} vs {}",
                self.sample_rate, other.sample_rate
            )));
        }
        Ok(())
    }

    /// Samples `start..start + len`.
    pub fn segment(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Shape(format!(
                "segment {start}+{len} exceeds {} samples",
                self.len()
            )));
        }
        Ok(Self {
            samples: self.samples[start..start + len].to_vec(),
            sample_rate: self.sample_rate,
        })
    }

    pub fn cast<U: Real>(&self) -> AudioBuffer<U> {
        AudioBuffer {
            samples: self.samples.iter().map(|v| U::lit(v.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

/// Scales `noise` so that `20·log10(‖s‖/‖n‖) = snr_db` and returns
/// `(y, n_scaled)` with `y = s + n_scaled`.
pub fn mix_at_snr<T: Real>(
    clean: &AudioBuffer<T>,
    noise: &AudioBuffer<T>,
    snr_db: T,
) -> Result<(AudioBuffer<T>, AudioBuffer<T>)> {
    clean.check_compatible(noise)?;
    if !snr_db.is_finite() {
        return Err(Error::Config(format!("SNR must be finite, got {snr_db}")));
    }
    let ns = clean.norm();
    let nn = noise.norm();
    if !(ns > T::zero()) || !(nn > T::zero()) {
        return Err(Error::Degenerate("cannot mix silent signals".into()));
    }
    let target = ns / T::lit(10.0).powf(snr_db / T::lit(20.0));
    let scaled = noise.scale(target / nn);
    Ok((clean.add(&scaled)?, scaled))
}

/// Reads a mono 16-bit PCM WAV at 16 kHz into `[-1, 1)`.
pub fn read_wav(path: &Path) -> Result<AudioBuffer<f64>> {
    let mut reader = hound::WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1
        || spec.bits_per_sample != 16
        || spec.sample_format != hound::SampleFormat::Int
        || spec.sample_rate != WAV_SAMPLE_RATE
    {
        return Err(Error::UnsupportedAudio(format!(
            "{}: need mono 16-bit PCM at {WAV_SAMPLE_RATE} Hz, got {} ch, {} bit {:?}, {} Hz",
            path.display(),
            spec.channels,
            spec.bits_per_sample,
            spec.sample_format,
            spec.sample_rate
        )));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| f64::from(v) / PCM16_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    AudioBuffer::new(samples, spec.sample_rate)
}

/// Writes mono 16-bit PCM, clipping to the representable range. Returns
/// the number of clipped samples.
pub fn write_wav<T: Real>(path: &Path, buf: &AudioBuffer<T>) -> Result<usize> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: buf.sample_rate(),
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec)?;
    let mut clipped = 0;
    for &v in buf.samples() {
        let q = (v.as_f64() * PCM16_SCALE).round();
        let c = q.clamp(f64::from(i16::MIN), f64::from(i16::MAX));
        if c != q {
            clipped += 1;
        }
        writer.write_sample(c as i16)?;
    }
    writer.finalize()?;
    Ok(clipped)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(v: &[f64]) -> AudioBuffer<f64> {
        AudioBuffer::new(v.to_vec(), WAV_SAMPLE_RATE).unwrap()
    }

    #[test]
    fn rejects_invalid_buffers() {
        assert!(AudioBuffer::new(vec![0.0f64, f64::NAN], 16000).is_err());
        assert!(AudioBuffer::new(vec![0.0f64], 0).is_err());
    }

    #[test]
    fn mixing_hits_the_target_norm() {
        let s = buf(&[1.0, -2.0, 0.5, 0.25]);
        let n = buf(&[0.3, 0.1, -0.7, 0.2]);
        let (y, ns) = mix_at_snr(&s, &n, 0.0).unwrap();
        assert!((ns.norm() - s.norm()).abs() < 1e-12);
        assert_eq!(y, s.add(&ns).unwrap());
        let (_, ns) = mix_at_snr(&s, &n, 20.0).unwrap();
        assert!((ns.norm() - s.norm() / 10.0).abs() < 1e-12);
    }

    #[test]
    fn mixing_rejects_silence_and_mismatch() {
        let s = buf(&[1.0, 2.0]);
        assert!(mix_at_snr(&s, &buf(&[0.0, 0.0]), 5.0).is_err());
        assert!(mix_at_snr(&buf(&[0.0, 0.0]), &s, 5.0).is_err());
        assert!(mix_at_snr(&s, &buf(&[1.0]), 5.0).is_err());
        let other_rate = AudioBuffer::new(vec![1.0, 1.0], 8000).unwrap();
        assert!(mix_at_snr(&s, &other_rate, 5.0).is_err());
    }

    #[test]
    fn wav_round_trip_quantizes_to_pcm16() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.wav");
        let b = buf(&[0.0, 0.5, -0.5, 0.999, -1.0, 0.123_456]);
        assert_eq!(write_wav(&path, &b).unwrap(), 0);
        let r = read_wav(&path).unwrap();
        assert_eq!(r.len(), b.len());
        for (a, b) in r.samples().iter().zip(b.samples()) {
            assert!((a - b).abs() <= 0.5 / PCM16_SCALE + 1e-15);
        }
        assert_eq!(r.samples()[4], -1.0);
    }

    #[test]
    fn wav_write_counts_clipping() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.wav");
        assert_eq!(write_wav(&path, &buf(&[1.5, -2.0, 0.0])).unwrap(), 2);
    }

    #[test]
    fn wav_rejects_stereo() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.wav");
        let spec = hound::WavSpec {
            channels: 2,
            sample_rate: WAV_SAMPLE_RATE,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(&path, spec).unwrap();
        w.write_sample(0i16).unwrap();
        w.write_sample(0i16).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&path), Err(Error::UnsupportedAudio(_))));
    }

    #[test]
    fn segment_bounds() {
        let b = buf(&[1.0, 2.0, 3.0]);
        assert_eq!(b.segment(1, 2).unwrap().samples(), &[2.0, 3.0]);
        assert!(b.segment(2, 2).is_err());
    }
}
