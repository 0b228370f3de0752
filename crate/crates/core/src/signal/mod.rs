//! Time-domain audio, STFT analysis/synthesis, amplitude compression and
//! mixture synthesis.

mod audio;
mod compress;
mod pipeline;
mod stft;
mod synth;

pub use audio::{mix_at_snr, read_wav, write_wav, AudioBuffer, WAV_SAMPLE_RATE};
pub use compress::{compress, decompress, CompressionParams};
pub use pipeline::{PipelineConfig, SpectralPipeline};
pub use stft::{istft, periodic_hann, stft, Padding, StftConfig, StftProcessor};
pub use synth::{synthetic_mixture, synthetic_noise, synthetic_speech, SyntheticMixture};
