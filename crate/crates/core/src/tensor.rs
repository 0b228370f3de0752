//! Complex F×K grid that carries every SDE state.

use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{complex_standard_normal, Real};

/// Complex spectrogram with `freq_bins` rows and `frames` columns, stored
/// row-major (frequency-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramTensor<T> {
    freq_bins: usize,
    frames: usize,
    data: Vec<Complex<T>>,
}

impl<T: Real> SpectrogramTensor<T> {
    pub fn zeros(freq_bins: usize, frames: usize) -> Self {
        Self {
            freq_bins,
            frames,
            data: vec![Complex::new(T::zero(), T::zero()); freq_bins * frames],
        }
    }

    pub fn filled(freq_bins: usize, frames: usize, value: Complex<T>) -> Self {
        Self {
            freq_bins,
            frames,
            data: vec![value; freq_bins * frames],
        }
    }

    /// Builds a tensor from row-major data.
    pub fn from_vec(freq_bins: usize, frames: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != freq_bins * frames {
            return Err(Error::Shape(format!(
                "{} entries do not fill a {freq_bins}x{frames} grid",
                data.len()
            )));
        }
        Ok(Self {
            freq_bins,
            frames,
            data,
        })
    }

    pub fn from_fn(
        freq_bins: usize,
        frames: usize,
        mut f: impl FnMut(usize, usize) -> Complex<T>,
    ) -> Self {
        let mut data = Vec::with_capacity(freq_bins * frames);
        for fb in 0..freq_bins {
            for k in 0..frames {
                data.push(f(fb, k));
            }
        }
        Self {
            freq_bins,
            frames,
            data,
        }
    }

    /// Scalar (1×1) tensor.
    pub fn scalar(value: Complex<T>) -> Self {
        Self::filled(1, 1, value)
    }

    /// Tensor of i.i.d. circularly-symmetric complex standard normals.
    pub fn standard_normal<R: Rng + ?Sized>(freq_bins: usize, frames: usize, rng: &mut R) -> Self {
        let data = (0..freq_bins * frames)
            .map(|_| complex_standard_normal(rng))
            .collect();
        Self {
            freq_bins,
            frames,
            data,
        }
    }

    #[inline]
    pub fn freq_bins(&self) -> usize {
        self.freq_bins
    }

    #[inline]
    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn dims(&self) -> (usize, usize) {
        (self.freq_bins, self.frames)
    }

    /// Total number of complex entries, `F·K`.
    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[Complex<T>] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [Complex<T>] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex<T>> {
        self.data
    }

    #[inline]
    pub fn get(&self, freq: usize, frame: usize) -> Complex<T> {
        self.data[freq * self.frames + frame]
    }

    #[inline]
    pub fn set(&mut self, freq: usize, frame: usize, value: Complex<T>) {
        self.data[freq * self.frames + frame] = value;
    }

    /// Errors unless `other` has the same grid shape.
    pub fn check_same_dims(&self, other: &Self) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Shape(format!(
                "{}x{} vs {}x{}",
                self.freq_bins, self.frames, other.freq_bins, other.frames
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(Complex<T>) -> Complex<T>) -> Self {
        Self {
            freq_bins: self.freq_bins,
            frames: self.frames,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }

    /// Elementwise combination of two same-shape tensors.
    pub fn zip_map(
        &self,
        other: &Self,
        mut f: impl FnMut(Complex<T>, Complex<T>) -> Complex<T>,
    ) -> Result<Self> {
        self.check_same_dims(other)?;
        Ok(Self {
            freq_bins: self.freq_bins,
            frames: self.frames,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn scale(&self, a: T) -> Self {
        self.map(|c| c * a)
    }

    /// `self += a · other`
    pub fn axpy(&mut self, a: T, other: &Self) -> Result<()> {
        self.check_same_dims(other)?;
        for (x, &o) in self.data.iter_mut().zip(&other.data) {
            *x += o * a;
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    /// Squared Frobenius norm `Σ|c|²`.
    pub fn norm_sqr(&self) -> T {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn norm(&self) -> T {
        self.norm_sqr().sqrt()
    }

    /// Largest absolute entry modulus.
    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|c| c.norm())
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }

    /// Copies frames `start..start + count` into a new tensor.
    pub fn crop_frames(&self, start: usize, count: usize) -> Result<Self> {
        if start + count > self.frames {
            return Err(Error::Shape(format!(
                "crop {start}+{count} exceeds {} frames",
                self.frames
            )));
        }
        Ok(Self::from_fn(self.freq_bins, count, |f, k| {
            self.get(f, start + k)
        }))
    }
}
