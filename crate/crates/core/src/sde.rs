//! The two interpolating forward processes and their closed-form
//! perturbation kernels.
//!
//! Both processes share the exponential diffusion coefficient
//! `g(t) = √c · kᵗ` and a mean of the form `(1 - κ(t))·X₀ + κ(t)·Y`:
//!
//! | process | drift `f(x, y, t)` | `κ(t)` | horizon |
//! |---------|--------------------|--------|---------|
//! | OUVE    | `γ (y - x)`        | `1 - e^{-γt}` | `T < ∞` |
//! | BBED    | `(y - x)/(1 - t)`  | `t`    | `T < 1` |
//!
//! All logarithms are natural.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::specfun::ei_value;
use crate::tensor::SpectrogramTensor;

/// Which forward process.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Ornstein–Uhlenbeck drift with variance-exploding diffusion.
    Ouve,
    /// Brownian bridge with exponential diffusion coefficient.
    Bbed,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Variant::Ouve => f.write_str("ouve"),
            Variant::Bbed => f.write_str("bbed"),
        }
    }
}

/// Validated process parameters. Construct through [`ProcessParams::ouve`],
/// [`ProcessParams::bbed`] or a preset; fields are read-only afterwards.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawProcessParams<T>",
    into = "RawProcessParams<T>",
    bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>")
)]
pub struct ProcessParams<T> {
    variant: Variant,
    gamma: T,
    c: T,
    k: T,
    t_max: T,
}

/// Wire form of [`ProcessParams`]: `variant`, `gamma` (OUVE only), `c`, `k`, `T`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum RawProcessParams<T> {
    Ouve {
        gamma: T,
        c: T,
        k: T,
        #[serde(rename = "T")]
        t_max: T,
    },
    Bbed {
        c: T,
        k: T,
        #[serde(rename = "T")]
        t_max: T,
    },
}

impl<T: Real> TryFrom<RawProcessParams<T>> for ProcessParams<T> {
    type Error = Error;

    fn try_from(raw: RawProcessParams<T>) -> Result<Self> {
        match raw {
            RawProcessParams::Ouve { gamma, c, k, t_max } => Self::ouve(gamma, c, k, t_max),
            RawProcessParams::Bbed { c, k, t_max } => Self::bbed(c, k, t_max),
        }
    }
}

impl<T: Real> From<ProcessParams<T>> for RawProcessParams<T> {
    fn from(p: ProcessParams<T>) -> Self {
        match p.variant {
            Variant::Ouve => RawProcessParams::Ouve {
                gamma: p.gamma,
                c: p.c,
                k: p.k,
                t_max: p.t_max,
            },
            Variant::Bbed => RawProcessParams::Bbed {
                c: p.c,
                k: p.k,
                t_max: p.t_max,
            },
        }
    }
}

/// Gaussian kernel of `X_t | (X₀, Y)`: mean tensor and scalar std
/// (covariance `std²·I`).
#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationKernel<T> {
    pub mean: SpectrogramTensor<T>,
    pub std: T,
}

/// Location and height of the maximum of `σ(t)²` on `[0, T]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VariancePeak<T> {
    pub t_star: T,
    pub var_star: T,
}

fn nonnegative_c<T: Real>(c: T) -> Result<()> {
    // c = 0 is the diffusionless limit used to check the mean ODE.
    if c.is_finite() && c >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("c must be finite and >= 0, got {c}")))
    }
}

fn positive_finite<T: Real>(name: &str, v: T) -> Result<()> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")))
    }
}

impl<T: Real> ProcessParams<T> {
    pub fn ouve(gamma: T, c: T, k: T, t_max: T) -> Result<Self> {
        positive_finite("gamma", gamma)?;
        nonnegative_c(c)?;
        positive_finite("T", t_max)?;
        if !(k.is_finite() && k > T::one()) {
            return Err(Error::InvalidParams(format!("OUVE needs k > 1, got {k}")));
        }
        if !(gamma + k.ln() > T::zero()) {
            return Err(Error::InvalidParams("OUVE needs gamma + ln k > 0".into()));
        }
        Ok(Self {
            variant: Variant::Ouve,
            gamma,
            c,
            k,
            t_max,
        })
    }

    /// OUVE from the `σ_min·(σ_max/σ_min)ᵗ·√(2 ln(σ_max/σ_min))` form:
    /// `k = σ_max/σ_min`, `c = 2 σ_min² ln k`.
    pub fn ouve_from_sigmas(gamma: T, sigma_min: T, sigma_max: T, t_max: T) -> Result<Self> {
        positive_finite("sigma_min", sigma_min)?;
        positive_finite("sigma_max", sigma_max)?;
        let k = sigma_max / sigma_min;
        let c = T::lit(2.0) * sigma_min * sigma_min * k.ln();
        Self::ouve(gamma, c, k, t_max)
    }

    /// BBED. `k = 1` is accepted and gives the classical bridge variance
    /// `c·t(1-t)`.
    pub fn bbed(c: T, k: T, t_max: T) -> Result<Self> {
        nonnegative_c(c)?;
        positive_finite("k", k)?;
        if !(t_max > T::zero() && t_max < T::one()) {
            return Err(Error::InvalidParams(format!("BBED needs 0 < T < 1, got {t_max}")));
        }
        Ok(Self {
            variant: Variant::Bbed,
            gamma: T::zero(),
            c,
            k,
            t_max,
        })
    }

    /// Baseline parameterization: `γ = 1.5, c = 0.01, k = 10, T = 1`.
    pub fn ouve_paper() -> Self {
        Self::ouve(T::lit(1.5), T::lit(0.01), T::lit(10.0), T::one()).expect("valid preset")
    }

    /// Proposed parameterization: `c = 0.51, k = 2.6, T = 0.999`.
    pub fn bbed_paper() -> Self {
        Self::bbed(T::lit(0.51), T::lit(2.6), T::lit(0.999)).expect("valid preset")
    }

    /// Copy with a different `c` (`c = 0` allowed for drift-only runs).
    pub fn with_c(&self, c: T) -> Result<Self> {
        nonnegative_c(c)?;
        Ok(Self { c, ..*self })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// OUVE stiffness; `None` for BBED.
    pub fn gamma(&self) -> Option<T> {
        (self.variant == Variant::Ouve).then_some(self.gamma)
    }

    pub fn c(&self) -> T {
        self.c
    }

    pub fn k(&self) -> T {
        self.k
    }

    /// Final diffusion time `T`.
    pub fn t_max(&self) -> T {
        self.t_max
    }

    fn check_time(&self, t: T) -> Result<()> {
        // Grids built as i·(T/n) may overshoot T by an ulp.
        let hi = self.t_max * (T::one() + T::lit(4.0) * T::epsilon());
        if t.is_finite() && t >= T::zero() && t <= hi {
            Ok(())
        } else {
            Err(Error::TimeOutOfRange {
                t: t.as_f64(),
                lo: 0.0,
                hi: self.t_max.as_f64(),
            })
        }
    }

    /// Interpolation factor `κ(t)` weighting `Y` in the kernel mean.
    pub fn interp_factor(&self, t: T) -> Result<T> {
        self.check_time(t)?;
        Ok(self.interp_factor_unchecked(t))
    }

    fn interp_factor_unchecked(&self, t: T) -> T {
        match self.variant {
            Variant::Ouve => -(-self.gamma * t).exp_m1(),
            Variant::Bbed => t,
        }
    }

    /// Maximal interpolation factor `κ(T)`.
    pub fn mif(&self) -> T {
        self.interp_factor_unchecked(self.t_max)
    }

    /// `∂f/∂x`, a scalar multiple of the identity for both processes.
    pub fn drift_jacobian(&self, t: T) -> Result<T> {
        match self.variant {
            Variant::Ouve => Ok(-self.gamma),
            Variant::Bbed => {
                if !(t < T::one()) {
                    return Err(Error::TimeOutOfRange {
                        t: t.as_f64(),
                        lo: 0.0,
                        hi: 1.0,
                    });
                }
                Ok(-T::one() / (T::one() - t))
            }
        }
    }

    /// Drift coefficient `f(x, y, t)`, pulling `x` toward `y`.
    pub fn drift(
        &self,
        x: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>> {
        let rate = -self.drift_jacobian(t)?;
        y.zip_map(x, |yv, xv| (yv - xv) * rate)
    }

    /// Diffusion coefficient `g(t) = √c·kᵗ`.
    pub fn diffusion(&self, t: T) -> T {
        self.c.sqrt() * self.k.powf(t)
    }

    /// Kernel mean `(1 - κ(t))·x₀ + κ(t)·y`.
    pub fn kernel_mean(
        &self,
        x0: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>> {
        let kappa = self.interp_factor(t)?;
        let keep = T::one() - kappa;
        x0.zip_map(y, |a, b| a * keep + b * kappa)
    }

    /// Scalar version of [`Self::kernel_mean`].
    pub fn kernel_mean_scalar(&self, x0: Complex<T>, y: Complex<T>, t: T) -> Result<Complex<T>> {
        let kappa = self.interp_factor(t)?;
        Ok(x0 * (T::one() - kappa) + y * kappa)
    }

    /// Kernel variance `σ(t)²`. For BBED, `t = 1` returns the analytic
    /// limit 0 without touching `Ei(0)`.
    pub fn kernel_var(&self, t: T) -> Result<T> {
        if self.variant == Variant::Bbed && t == T::one() {
            return Ok(T::zero());
        }
        self.check_time(t)?;
        Ok(self.c * self.variance_shape(t)?)
    }

    pub fn kernel_std(&self, t: T) -> Result<T> {
        self.kernel_var(t).map(|v| v.sqrt())
    }

    pub fn kernel(
        &self,
        x0: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<PerturbationKernel<T>> {
        Ok(PerturbationKernel {
            mean: self.kernel_mean(x0, y, t)?,
            std: self.kernel_std(t)?,
        })
    }

    /// `σ(t)² / c`; the variance is linear in `c`.
    fn variance_shape(&self, t: T) -> Result<T> {
        if t == T::zero() {
            return Ok(T::zero());
        }
        let two = T::lit(2.0);
        let ln_k = self.k.ln();
        let v = match self.variant {
            Variant::Ouve => {
                ((two * t * ln_k).exp_m1() - (-two * self.gamma * t).exp_m1())
                    / (two * (self.gamma + ln_k))
            }
            Variant::Bbed if self.k == T::one() => t * (T::one() - t),
            Variant::Bbed => {
                let one_minus = T::one() - t;
                let e = ei_value(two * (t - T::one()) * ln_k)? - ei_value(-two * ln_k)?;
                let growth = (two * t * ln_k).exp_m1() + t;
                one_minus * (growth + two * self.k * self.k * ln_k * one_minus * e)
            }
        };
        Ok(v.max(T::zero()))
    }

    /// Maximum of `σ(t)²` over `[0, T]`: 1000-point scan refined by
    /// golden-section search. For a monotone variance (OUVE) the peak is
    /// the boundary `t = T`. The location depends only on the shape, so it
    /// is exactly invariant under rescaling `c`.
    pub fn variance_peak(&self) -> Result<VariancePeak<T>> {
        const SCAN: usize = 1000;
        let t_max = self.t_max;
        let step = t_max / T::from_usize_lossy(SCAN - 1);
        let mut best = (0usize, T::neg_infinity());
        for i in 0..SCAN {
            let t = if i == SCAN - 1 { t_max } else { step * T::from_usize_lossy(i) };
            let v = self.variance_shape(t)?;
            if v > best.1 {
                best = (i, v);
            }
        }
        let (idx, _) = best;
        if idx == SCAN - 1 {
            return Ok(VariancePeak {
                t_star: t_max,
                var_star: self.c * self.variance_shape(t_max)?,
            });
        }
        let mut lo = step * T::from_usize_lossy(idx.saturating_sub(1));
        let mut hi = (step * T::from_usize_lossy(idx + 1)).min(t_max);
        let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let tol = T::lit(1e-8).max(T::epsilon().sqrt() * T::lit(4.0));
        let mut a = hi - inv_phi * (hi - lo);
        let mut b = lo + inv_phi * (hi - lo);
        let mut fa = self.variance_shape(a)?;
        let mut fb = self.variance_shape(b)?;
        while hi - lo > tol {
            if fa < fb {
                lo = a;
                a = b;
                fa = fb;
                b = lo + inv_phi * (hi - lo);
                fb = self.variance_shape(b)?;
            } else {
                hi = b;
                b = a;
                fb = fa;
                a = hi - inv_phi * (hi - lo);
                fa = self.variance_shape(a)?;
            }
        }
        let t_star = (lo + hi) / T::lit(2.0);
        Ok(VariancePeak {
            t_star,
            var_star: self.c * self.variance_shape(t_star)?,
        })
    }
}

/// Diffusion scale `c` that puts the BBED variance maximum at
/// `target_peak_var`, i.e. `target / max_t σ²(t; c = 1)`.
pub fn calibrate_c<T: Real>(k: T, t_max: T, target_peak_var: T) -> Result<T> {
    if !(target_peak_var.is_finite() && target_peak_var > T::zero()) {
        return Err(Error::InvalidParams(format!(
            "target peak variance must be > 0, got {target_peak_var}"
        )));
    }
    let unit = ProcessParams::bbed(T::one(), k, t_max)?;
    let peak = unit.variance_peak()?;
    Ok(target_peak_var / peak.var_star)
}
