//! Seeded stand-ins for speech and noise recordings.

use rand::Rng;

use super::audio::{mix_at_snr, AudioBuffer, WAV_SAMPLE_RATE};
use crate::error::Result;
use crate::sampling::stream_rng;
use crate::scalar::Real;

/// Voiced, syllable-modulated harmonic signal with a peak near 0.5.
pub fn synthetic_speech<R: Rng + ?Sized>(len: usize, sample_rate: u32, rng: &mut R) -> AudioBuffer<f64> {
    let sr = f64::from(sample_rate);
    let f0 = rng.gen_range(100.0..220.0);
    let vibrato_rate = rng.gen_range(3.0..6.0);
    let syllable_rate = rng.gen_range(3.0..5.0);
    let phase0 = rng.gen_range(0.0..std::f64::consts::TAU);
    let n_harm = 8;
    let amps: Vec<f64> = (1..=n_harm)
        .map(|h| rng.gen_range(0.5..1.0) / h as f64)
        .collect();
    let mut phase = 0.0;
    let mut x: Vec<f64> = (0..len)
        .map(|n| {
            let t = n as f64 / sr;
            let f = f0 * (1.0 + 0.03 * (std::f64::consts::TAU * vibrato_rate * t).sin());
            phase += std::f64::consts::TAU * f / sr;
            let env = (std::f64::consts::PI * syllable_rate * t + phase0).sin().powi(2);
            let voiced: f64 = amps
                .iter()
                .enumerate()
                .map(|(h, a)| a * ((h + 1) as f64 * phase).sin())
                .sum();
            env * voiced
        })
        .collect();
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    AudioBuffer::new(x, sample_rate).expect("finite by construction")
}

/// White noise through a random one-pole low-pass, unit RMS.
pub fn synthetic_noise<R: Rng + ?Sized>(len: usize, sample_rate: u32, rng: &mut R) -> AudioBuffer<f64> {
    let a = rng.gen_range(0.0..0.9);
    let mut state = 0.0;
    let mut x: Vec<f64> = (0..len)
        .map(|_| {
            state = a * state + f64::standard_normal(rng);
            state
        })
        .collect();
    let rms = (x.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt();
    if rms > 0.0 {
        x.iter_mut().for_each(|v| *v /= rms);
    }
    AudioBuffer::new(x, sample_rate).expect("finite by construction")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticMixture {
    pub clean: AudioBuffer<f64>,
    /// Noise already scaled to `snr_db`.
    pub noise: AudioBuffer<f64>,
    pub mixture: AudioBuffer<f64>,
    pub snr_db: f64,
}

/// Mixture `index` of the family identified by `seed`, with SNR drawn
/// uniformly from `[0, 20]` dB.
pub fn synthetic_mixture(seed: u64, index: u64, len: usize) -> Result<SyntheticMixture> {
    let mut rng = stream_rng(seed, index);
    let clean = synthetic_speech(len, WAV_SAMPLE_RATE, &mut rng);
    let raw = synthetic_noise(len, WAV_SAMPLE_RATE, &mut rng);
    let snr_db = rng.gen_range(0.0..=20.0);
    let (mixture, noise) = mix_at_snr(&clean, &raw, snr_db)?;
    Ok(SyntheticMixture {
        clean,
        noise,
        mixture,
        snr_db,
    })
}
