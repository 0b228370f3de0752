use serde::{Deserialize, Serialize};

use super::audio::AudioBuffer;
use super::compress::{compress, decompress, CompressionParams};
use super::stft::{Padding, StftConfig, StftProcessor};
use crate::error::Result;
use crate::scalar::Real;
use crate::tensor::SpectrogramTensor;

/// Settings shared by analysis and synthesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default)]
    pub stft: StftConfig,
    #[serde(default)]
    pub compression: CompressionParams,
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.compression.validate()
    }
}

/// Waveform ↔ compressed complex spectrogram, length preserving.
pub struct SpectralPipeline<T: Real> {
    processor: StftProcessor<T>,
    compression: CompressionParams,
}

impl<T: Real> SpectralPipeline<T> {
    pub fn new(cfg: PipelineConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            processor: StftProcessor::new(cfg.stft)?,
            compression: cfg.compression,
        })
    }

    pub fn processor(&self) -> &StftProcessor<T> {
        &self.processor
    }

    /// Pad, STFT, compress.
    pub fn analyze(&self, buf: &AudioBuffer<T>) -> Result<(SpectrogramTensor<T>, Padding)> {
        let (spec, pad) = self.processor.analyze_padded(buf)?;
        Ok((compress(&spec, &self.compression)?, pad))
    }

    /// Decompress, ISTFT, crop.
    pub fn synthesize(
        &self,
        spec: &SpectrogramTensor<T>,
        pad: &Padding,
        sample_rate: u32,
    ) -> Result<AudioBuffer<T>> {
        let raw = decompress(spec, &self.compression)?;
        self.processor.synthesize_cropped(&raw, pad, sample_rate)
    }
}
