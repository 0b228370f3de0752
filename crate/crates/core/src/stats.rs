//! Sample moments with standard errors, for Monte-Carlo checks.

use num_complex::Complex;
use serde::Serialize;

use crate::scalar::Real;

/// Mean of a real sample and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanEstimate<T> {
    pub mean: T,
    pub stderr: T,
    pub n: usize,
}

impl<T: Real> MeanEstimate<T> {
    pub fn from_samples(xs: &[T]) -> Self {
        let n = xs.len();
        let nf = T::from_usize_lossy(n);
        let mean = xs.iter().copied().sum::<T>() / nf;
        let var = if n > 1 {
            xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / (nf - T::one())
        } else {
            T::zero()
        };
        Self {
            mean,
            stderr: (var / nf).sqrt(),
            n,
        }
    }

    /// `|mean - target|` measured in standard errors.
    pub fn z_score(&self, target: T) -> T {
        let d = (self.mean - target).abs();
        if self.stderr > T::zero() {
            d / self.stderr
        } else if d == T::zero() {
            T::zero()
        } else {
            T::infinity()
        }
    }

    pub fn within(&self, target: T, n_stderr: T) -> bool {
        self.z_score(target) <= n_stderr
    }
}

/// First two moments of a complex sample: mean (per component) and the
/// variance `E|X - EX|²`, each with a standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexMoments<T> {
    pub mean_re: MeanEstimate<T>,
    pub mean_im: MeanEstimate<T>,
    pub var: MeanEstimate<T>,
}

impl<T: Real> ComplexMoments<T> {
    pub fn from_samples(zs: &[Complex<T>]) -> Self {
        let re: Vec<T> = zs.iter().map(|z| z.re).collect();
        let im: Vec<T> = zs.iter().map(|z| z.im).collect();
        let mean_re = MeanEstimate::from_samples(&re);
        let mean_im = MeanEstimate::from_samples(&im);
        let centre = Complex::new(mean_re.mean, mean_im.mean);
        let n = zs.len();
        let sq: Vec<T> = zs.iter().map(|z| (z - centre).norm_sqr()).collect();
        let mut var = MeanEstimate::from_samples(&sq);
        if n > 1 {
            // Bessel correction for the estimated centre.
            let nf = T::from_usize_lossy(n);
            let corr = nf / (nf - T::one());
            var.mean *= corr;
            var.stderr *= corr;
        }
        Self {
            mean_re,
            mean_im,
            var,
        }
    }

    pub fn mean(&self) -> Complex<T> {
        Complex::new(self.mean_re.mean, self.mean_im.mean)
    }

    /// True when both mean components and the variance are within
    /// `n_stderr` standard errors of the targets.
    pub fn matches(&self, mean: Complex<T>, var: T, n_stderr: T) -> bool {
        self.mean_re.within(mean.re, n_stderr)
            && self.mean_im.within(mean.im, n_stderr)
            && self.var.within(var, n_stderr)
    }
}
