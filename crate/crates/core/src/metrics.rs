//! SNR, the mean-mismatch trajectory ΔSNR(t), and the scale-invariant
//! SDR/SIR/SAR decomposition.

use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sde::ProcessParams;
use crate::signal::{AudioBuffer, SpectralPipeline};

/// Level in dB, or an exactly vanishing denominator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decibels<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Decibels<T> {
    /// `10·log10(num/den)`, infinite when `den ≤ (64ε)²·num`.
    pub fn from_energy_ratio(num: T, den: T) -> Self {
        let tol = T::epsilon() * T::lit(64.0);
        if den <= tol * tol * num {
            Decibels::Infinite
        } else {
            Decibels::Finite(T::lit(10.0) * (num / den).log10())
        }
    }

    pub fn finite(self) -> Option<T> {
        match self {
            Decibels::Finite(v) => Some(v),
            Decibels::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Decibels::Infinite)
    }

    /// `10^{-dB/10}`, i.e. the energy ratio `den/num`; 0 when infinite.
    pub fn inverse_ratio(self) -> T {
        match self {
            Decibels::Finite(v) => T::lit(10.0).powf(-v / T::lit(10.0)),
            Decibels::Infinite => T::zero(),
        }
    }
}

impl<T: Real> fmt::Display for Decibels<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decibels::Finite(v) => write!(f, "{v}"),
            Decibels::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Real> Serialize for Decibels<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Decibels::Finite(v) => s.serialize_f64(v.as_f64()),
            Decibels::Infinite => s.serialize_str("inf"),
        }
    }
}

/// `20·log10(‖s‖/‖y′ - s‖)`.
pub fn snr_db<T: Real>(y_prime: &AudioBuffer<T>, s: &AudioBuffer<T>) -> Result<Decibels<T>> {
    let err = y_prime.sub(s)?.energy();
    let sig = s.energy();
    if !(sig > T::zero()) {
        return Err(Error::Degenerate("reference signal is silent".into()));
    }
    Ok(Decibels::from_energy_ratio(sig, err))
}

fn finite_snr<T: Real>(y_prime: &AudioBuffer<T>, s: &AudioBuffer<T>, what: &str) -> Result<T> {
    snr_db(y_prime, s)?
        .finite()
        .ok_or_else(|| Error::Degenerate(format!("{what} coincides with the clean signal")))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DsnrPoint<T> {
    pub t: T,
    pub dsnr_db: T,
}

/// `ΔSNR(t) = SNR(μ(t), s) - SNR(y, s)` with `y = s + n` and `μ(t)` the
/// kernel mean formed in the compressed spectral domain and synthesized
/// back to a waveform.
pub fn dsnr_trajectory<T: Real>(
    params: &ProcessParams<T>,
    pipeline: &SpectralPipeline<T>,
    s: &AudioBuffer<T>,
    n: &AudioBuffer<T>,
    t_grid: &[T],
) -> Result<Vec<DsnrPoint<T>>> {
    let y = s.add(n)?;
    let base = finite_snr(&y, s, "mixture")?;
    let (s_spec, pad) = pipeline.analyze(s)?;
    let (y_spec, _) = pipeline.analyze(&y)?;
    t_grid
        .iter()
        .map(|&t| {
            if !(t > T::zero()) {
                return Err(Error::Config(format!("ΔSNR grid must exclude t <= 0, got {t}")));
            }
            let mean = params.kernel_mean(&s_spec, &y_spec, t)?;
            let wave = pipeline.synthesize(&mean, &pad, s.sample_rate())?;
            Ok(DsnrPoint {
                t,
                dsnr_db: finite_snr(&wave, s, "process mean")? - base,
            })
        })
        .collect()
}

/// Pointwise average in dB over trajectories sharing one grid.
pub fn average_trajectories<T: Real>(runs: &[Vec<DsnrPoint<T>>]) -> Result<Vec<DsnrPoint<T>>> {
    let Some(first) = runs.first() else {
        return Err(Error::Config("no trajectories to average".into()));
    };
    let count = T::from_usize_lossy(runs.len());
    let mut out = first.clone();
    for run in &runs[1..] {
        if run.len() != first.len() || run.iter().zip(first).any(|(a, b)| a.t != b.t) {
            return Err(Error::Shape("trajectories use different grids".into()));
        }
        for (o, p) in out.iter_mut().zip(run) {
            o.dsnr_db += p.dsnr_db;
        }
    }
    for o in &mut out {
        o.dsnr_db /= count;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SiDecomposition<T> {
    pub si_sdr: Decibels<T>,
    pub si_sir: Decibels<T>,
    pub si_sar: Decibels<T>,
}

/// Scale-invariant SDR/SIR/SAR.
///
/// `estimate = αs + i + a`, with `αs` the projection onto `s`, `i` the
/// projection of the residual onto `n` orthogonalized against `s`, and `a`
/// what is left.
pub fn si_metrics<T: Real>(
    estimate: &AudioBuffer<T>,
    s: &AudioBuffer<T>,
    n: &AudioBuffer<T>,
) -> Result<SiDecomposition<T>> {
    estimate.check_compatible(s)?;
    estimate.check_compatible(n)?;
    let ss = s.energy();
    if !(ss > T::zero()) {
        return Err(Error::Degenerate("reference signal is silent".into()));
    }
    let n_perp = n.add_scaled(-n.dot(s)? / ss, s)?;
    let pp = n_perp.energy();
    let tol = T::epsilon() * T::lit(64.0);
    if pp <= tol * tol * n.energy() || !(pp > T::zero()) {
        return Err(Error::Degenerate("noise reference lies in span{s}".into()));
    }
    let alpha = estimate.dot(s)? / ss;
    let target = s.scale(alpha);
    let target_energy = target.energy();
    if !(target_energy > T::zero()) {
        return Err(Error::Degenerate("estimate is orthogonal to the reference".into()));
    }
    let e = estimate.sub(&target)?;
    let interference = n_perp.scale(e.dot(&n_perp)? / pp);
    let artifacts = e.sub(&interference)?;
    Ok(SiDecomposition {
        si_sdr: Decibels::from_energy_ratio(target_energy, e.energy()),
        si_sir: Decibels::from_energy_ratio(target_energy, interference.energy()),
        si_sar: Decibels::from_energy_ratio(target_energy, artifacts.energy()),
    })
}
