//! Interpolating diffusion SDEs for signal restoration.
//!
//! Two forward processes share the exponential diffusion coefficient
//! `g(t) = √c·kᵗ` and differ in their drift: an Ornstein–Uhlenbeck pull
//! toward the observation (OUVE), or a Brownian-bridge drift whose mean
//! reaches the observation exactly at `t = 1` (BBED). The crate provides
//! their closed-form perturbation kernels, forward and reverse samplers,
//! analytic score oracles and the STFT/metric pipeline needed to measure
//! how far each process's terminal mean sits from the observed mixture.
//!
//! All numerics are generic over [`Real`] (`f32`/`f64`); the aliases below
//! fix the scalar to `f64`.

pub mod error;
pub mod metrics;
pub mod oracles;
pub mod sampling;
pub mod scalar;
pub mod sde;
pub mod signal;
pub mod specfun;
pub mod stats;
pub mod tensor;
pub mod verify;

pub use error::{Error, Result};
pub use metrics::{Decibels, DsnrPoint, SiDecomposition};
pub use sampling::{ReverseOutcome, ScoreFunction};
pub use scalar::Real;
pub use sde::{calibrate_c, PerturbationKernel, Variant, VariancePeak};
pub use signal::{CompressionParams, PipelineConfig, StftConfig};
pub use specfun::{e1, ei, ei_value, EiResult};

pub type Complex64 = num_complex::Complex<f64>;

pub type ProcessParams = sde::ProcessParams<f64>;
pub type ProcessParams32 = sde::ProcessParams<f32>;
pub type Spectrogram = tensor::SpectrogramTensor<f64>;
pub type Spectrogram32 = tensor::SpectrogramTensor<f32>;
pub type AudioBuffer = signal::AudioBuffer<f64>;
pub type AudioBuffer32 = signal::AudioBuffer<f32>;
pub type ReverseConfig = sampling::ReverseConfig<f64>;
pub type ReverseConfig32 = sampling::ReverseConfig<f32>;
pub type SpectralPipeline = signal::SpectralPipeline<f64>;
pub type GaussianToyModel = oracles::GaussianToyModel<f64>;
