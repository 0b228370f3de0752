use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::SpectrogramTensor;

/// Frame geometry. The window is always periodic Hann.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StftConfig {
    pub window_size: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            window_size: 510,
            hop: 128,
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_size < 2 || self.window_size % 2 != 0 {
            return Err(Error::Config(format!(
                "window_size must be even and >= 2, got {}",
                self.window_size
            )));
        }
        if self.hop == 0 || self.hop >= self.window_size {
            return Err(Error::Config(format!(
                "hop must be in [1, window_size), got {}",
                self.hop
            )));
        }
        Ok(())
    }

    /// One-sided bin count `W/2 + 1`.
    pub fn freq_bins(&self) -> usize {
        self.window_size / 2 + 1
    }

    /// Left-aligned frames fitting in `len` samples.
    pub fn frames_for(&self, len: usize) -> usize {
        if len < self.window_size {
            0
        } else {
            1 + (len - self.window_size) / self.hop
        }
    }
}

/// `w[n] = ½(1 - cos(2πn/N))`, `n = 0..N`.
pub fn periodic_hann<T: Real>(n: usize) -> Vec<T> {
    let nf = T::from_usize_lossy(n);
    let half = T::lit(0.5);
    (0..n)
        .map(|i| half * (T::one() - (T::TAU() * T::from_usize_lossy(i) / nf).cos()))
        .collect()
}

/// Zero padding that puts every original sample inside full window
/// support, so analysis followed by synthesis and [`Padding::crop`] is
/// exact over the whole signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Padding {
    pub left: usize,
    pub right: usize,
    pub original_len: usize,
}

impl Padding {
    pub fn for_length(len: usize, cfg: &StftConfig) -> Self {
        let w = cfg.window_size;
        let base = len + 2 * w;
        let extra = (cfg.hop - (base - w) % cfg.hop) % cfg.hop;
        Self {
            left: w,
            right: w + extra,
            original_len: len,
        }
    }

    pub fn padded_len(&self) -> usize {
        self.left + self.original_len + self.right
    }

    pub fn apply<T: Real>(&self, buf: &AudioBuffer<T>) -> Result<AudioBuffer<T>> {
        if buf.len() != self.original_len {
            return Err(Error::Shape(format!(
                "padding built for {} samples, got {}",
                self.original_len,
                buf.len()
            )));
        }
        let mut v = vec![T::zero(); self.padded_len()];
        v[self.left..self.left + self.original_len].copy_from_slice(buf.samples());
        AudioBuffer::new(v, buf.sample_rate())
    }

    pub fn crop<T: Real>(&self, buf: &AudioBuffer<T>) -> Result<AudioBuffer<T>> {
        buf.segment(self.left, self.original_len)
    }
}

/// Planned forward/inverse transforms for one [`StftConfig`].
pub struct StftProcessor<T: Real> {
    cfg: StftConfig,
    window: Vec<T>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> StftProcessor<T> {
    pub fn new(cfg: StftConfig) -> Result<Self> {
        cfg.validate()?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            cfg,
            window: periodic_hann(cfg.window_size),
            forward: planner.plan_fft_forward(cfg.window_size),
            inverse: planner.plan_fft_inverse(cfg.window_size),
        })
    }

    pub fn config(&self) -> &StftConfig {
        &self.cfg
    }

    pub fn window(&self) -> &[T] {
        &self.window
    }

    /// One-sided STFT of left-aligned frames; no padding.
    pub fn stft(&self, buf: &AudioBuffer<T>) -> Result<SpectrogramTensor<T>> {
        let w = self.cfg.window_size;
        if buf.len() < w {
            return Err(Error::Shape(format!(
                "signal of {} samples is shorter than the window ({w})",
                buf.len()
            )));
        }
        let f_bins = self.cfg.freq_bins();
        let frames = self.cfg.frames_for(buf.len());
        let x = buf.samples();
        let mut out = SpectrogramTensor::zeros(f_bins, frames);
        let mut frame = vec![Complex::new(T::zero(), T::zero()); w];
        for k in 0..frames {
            let start = k * self.cfg.hop;
            for (n, slot) in frame.iter_mut().enumerate() {
                *slot = Complex::new(x[start + n] * self.window[n], T::zero());
            }
            self.forward.process(&mut frame);
            for (f, &v) in frame.iter().take(f_bins).enumerate() {
                out.set(f, k, v);
            }
        }
        Ok(out)
    }

    /// Windowed overlap-add synthesis normalized by the squared-window sum.
    /// Samples with no window support (the very first sample, and anything
    /// past the last frame) are zero.
    pub fn istft(&self, spec: &SpectrogramTensor<T>, length: usize, sample_rate: u32) -> Result<AudioBuffer<T>> {
        let w = self.cfg.window_size;
        let f_bins = self.cfg.freq_bins();
        if spec.freq_bins() != f_bins {
            return Err(Error::Shape(format!(
                "spectrogram has {} bins, config expects {f_bins}",
                spec.freq_bins()
            )));
        }
        let mut acc = vec![T::zero(); length];
        let mut wsum = vec![T::zero(); length];
        let mut frame = vec![Complex::new(T::zero(), T::zero()); w];
        let scale = T::one() / T::from_usize_lossy(w);
        for k in 0..spec.frames() {
            let start = k * self.cfg.hop;
            if start >= length {
                break;
            }
            for f in 0..f_bins {
                frame[f] = spec.get(f, k);
            }
            for f in f_bins..w {
                frame[f] = spec.get(w - f, k).conj();
            }
            self.inverse.process(&mut frame);
            for n in 0..w.min(length - start) {
                let wn = self.window[n];
                acc[start + n] += frame[n].re * scale * wn;
                wsum[start + n] += wn * wn;
            }
        }
        let floor = T::epsilon();
        let samples = acc
            .into_iter()
            .zip(wsum)
            .map(|(a, s)| if s > floor { a / s } else { T::zero() })
            .collect();
        AudioBuffer::new(samples, sample_rate)
    }

    /// Pads per [`Padding::for_length`] and analyzes.
    pub fn analyze_padded(&self, buf: &AudioBuffer<T>) -> Result<(SpectrogramTensor<T>, Padding)> {
        let pad = Padding::for_length(buf.len(), &self.cfg);
        Ok((self.stft(&pad.apply(buf)?)?, pad))
    }

    /// Inverse of [`Self::analyze_padded`], cropped to the original length.
    pub fn synthesize_cropped(
        &self,
        spec: &SpectrogramTensor<T>,
        pad: &Padding,
        sample_rate: u32,
    ) -> Result<AudioBuffer<T>> {
        pad.crop(&self.istft(spec, pad.padded_len(), sample_rate)?)
    }

    /// `Σ_k Σ_f m_f |X[f,k]|²` with `m_f = 2` for bins that stand for a
    /// conjugate pair, so the sum equals the full-spectrum energy.
    pub fn spectral_energy(&self, spec: &SpectrogramTensor<T>) -> T {
        let nyquist = self.cfg.window_size / 2;
        let two = T::lit(2.0);
        let mut e = T::zero();
        for f in 0..spec.freq_bins() {
            let m = if f == 0 || f == nyquist { T::one() } else { two };
            for k in 0..spec.frames() {
                e += m * spec.get(f, k).norm_sqr();
            }
        }
        e
    }
}

pub fn stft<T: Real>(buf: &AudioBuffer<T>, cfg: &StftConfig) -> Result<SpectrogramTensor<T>> {
    StftProcessor::new(*cfg)?.stft(buf)
}

pub fn istft<T: Real>(
    spec: &SpectrogramTensor<T>,
    cfg: &StftConfig,
    length: usize,
    sample_rate: u32,
) -> Result<AudioBuffer<T>> {
    StftProcessor::new(*cfg)?.istft(spec, length, sample_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::scalar::Real;
    use crate::signal::WAV_SAMPLE_RATE;

    fn noise(len: usize, seed: u64) -> AudioBuffer<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        AudioBuffer::new((0..len).map(|_| f64::standard_normal(&mut rng)).collect(), WAV_SAMPLE_RATE).unwrap()
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        let den: f64 = b.iter().map(|y| y * y).sum();
        (num / den).sqrt()
    }

    #[test]
    fn default_geometry() {
        let c = StftConfig::default();
        c.validate().unwrap();
        assert_eq!(c.freq_bins(), 256);
        assert_eq!(c.frames_for(509), 0);
        assert_eq!(c.frames_for(510), 1);
        assert_eq!(c.frames_for(510 + 128), 2);
        assert!(StftConfig { window_size: 510, hop: 510 }.validate().is_err());
        assert!(StftConfig { window_size: 511, hop: 128 }.validate().is_err());
    }

    #[test]
    fn hann_is_periodic() {
        let w = periodic_hann::<f64>(8);
        assert_eq!(w[0], 0.0);
        assert!((w[4] - 1.0).abs() < 1e-15);
        assert!((w[1] - w[7]).abs() < 1e-15);
    }

    #[test]
    fn too_short_input_is_error() {
        let c = StftConfig::default();
        assert!(stft(&AudioBuffer::<f64>::zeros(100, 16000), &c).is_err());
    }

    #[test]
    fn zero_in_zero_out() {
        let c = StftConfig::default();
        let s = stft(&AudioBuffer::<f64>::zeros(2000, 16000), &c).unwrap();
        assert_eq!(s.max_abs(), 0.0);
        let b = istft(&s, &c, 2000, 16000).unwrap();
        assert!(b.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bin_centred_sinusoid_concentrates() {
        let c = StftConfig::default();
        let bin = 40;
        let len = 4000;
        let x: Vec<f64> = (0..len)
            .map(|n| (std::f64::consts::TAU * bin as f64 * n as f64 / c.window_size as f64).cos())
            .collect();
        let s = stft(&AudioBuffer::new(x, 16000).unwrap(), &c).unwrap();
        let total: f64 = s.norm_sqr();
        let energy = |f: usize| -> f64 { (0..s.frames()).map(|k| s.get(f, k).norm_sqr()).sum() };
        // Hann main lobe: coefficients ½ at the bin and ¼ at each neighbour.
        let lobe = energy(bin - 1) + energy(bin) + energy(bin + 1);
        assert!(lobe / total >= 0.9, "{}", lobe / total);
        assert!((energy(bin) / total - 2.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn round_trip_on_interior() {
        let c = StftConfig::default();
        let p = StftProcessor::<f64>::new(c).unwrap();
        let len = 4 * c.window_size + 77;
        let x = noise(len, 5);
        let y = p.istft(&p.stft(&x).unwrap(), len, 16000).unwrap();
        let w = c.window_size;
        let covered = (c.frames_for(len) - 1) * c.hop + w;
        let a = &y.samples()[w..covered - w];
        let b = &x.samples()[w..covered - w];
        assert!(rel_err(a, b) < 1e-6, "{}", rel_err(a, b));
    }

    #[test]
    fn padded_round_trip_is_exact_everywhere() {
        let c = StftConfig::default();
        let p = StftProcessor::<f64>::new(c).unwrap();
        for len in [1, 509, 1000, 3333] {
            let x = noise(len, len as u64);
            let (s, pad) = p.analyze_padded(&x).unwrap();
            assert_eq!((pad.padded_len() - c.window_size) % c.hop, 0);
            let y = p.synthesize_cropped(&s, &pad, 16000).unwrap();
            assert_eq!(y.len(), len);
            assert!(rel_err(y.samples(), x.samples()) < 1e-12);
        }
    }

    #[test]
    fn istft_is_linear() {
        let c = StftConfig::default();
        let p = StftProcessor::<f64>::new(c).unwrap();
        let x = noise(3000, 6);
        let s = p.stft(&x).unwrap();
        let a = p.istft(&s, 3000, 16000).unwrap();
        let b = p.istft(&s.scale(-2.5), 3000, 16000).unwrap();
        for (u, v) in a.samples().iter().zip(b.samples()) {
            assert!((v + 2.5 * u).abs() < 1e-10);
        }
    }

    #[test]
    fn energy_constant() {
        // Per frame the full-spectrum energy is W·Σ(w·x)²; for a stationary
        // white signal this averages to W·Σw²/hop per input sample.
        let c = StftConfig::default();
        let p = StftProcessor::<f64>::new(c).unwrap();
        let x = noise(160_000, 7);
        let s = p.stft(&x).unwrap();
        let mut windowed = 0.0;
        for k in 0..s.frames() {
            for n in 0..c.window_size {
                windowed += (x.samples()[k * c.hop + n] * p.window()[n]).powi(2);
            }
        }
        let exact = c.window_size as f64 * windowed;
        assert!((p.spectral_energy(&s) / exact - 1.0).abs() < 1e-10);
        let covered = (s.frames() - 1) * c.hop + c.window_size;
        let ratio = p.spectral_energy(&s) / x.segment(0, covered).unwrap().energy();
        // W·(3W/8)/hop = 762.01…
        assert!((ratio / 762.011_718_75 - 1.0).abs() < 0.02, "{ratio}");
    }

    #[test]
    fn single_precision_round_trip() {
        let c = StftConfig::default();
        let p = StftProcessor::<f32>::new(c).unwrap();
        let x = noise(2000, 8).cast::<f32>();
        let (s, pad) = p.analyze_padded(&x).unwrap();
        let y = p.synthesize_cropped(&s, &pad, 16000).unwrap();
        let a: Vec<f64> = y.samples().iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = x.samples().iter().map(|&v| v as f64).collect();
        assert!(rel_err(&a, &b) < 1e-5);
    }
}
