//! Exponential integral `Ei` on the real line.
//!
//! `Ei(x) = -PV ∫_{-x}^{∞} e^{-t}/t dt`, with `Ei(-x) = -E1(x)` for `x > 0`.
//!
//! Evaluation strategy:
//! * `|x| ≤ 1`, and `0 < x ≤` [`positive_series_limit`]: the convergent power
//!   series `γ + ln|x| + Σ xⁿ/(n·n!)`, summed with Neumaier compensation.
//! * `x < -1`: `-E1(-x)` from the modified-Lentz continued fraction.
//! * large positive `x`: the asymptotic series `eˣ/x · Σ k!/xᵏ`, truncated
//!   at its smallest term.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Value of `Ei` with a rounding-error estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EiResult<T> {
    pub value: T,
    pub est_abs_error: T,
}

const MAX_ITER: usize = 1000;

/// Above this the positive-axis power series hands over to the asymptotic
/// expansion (`-ln ε + 4`: 40 for `f64`, ~20 for `f32`).
pub fn positive_series_limit<T: Real>() -> T {
    -T::epsilon().ln() + T::lit(4.0)
}

/// Exponential integral `Ei(x)` for finite nonzero `x`.
pub fn ei<T: Real>(x: T) -> Result<EiResult<T>> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("Ei of non-finite argument {x}")));
    }
    if x == T::zero() {
        return Err(Error::Domain("Ei has a logarithmic singularity at 0".into()));
    }
    if x < T::zero() {
        if -x <= T::one() {
            Ok(power_series(x))
        } else {
            let e1 = e1_continued_fraction(-x)?;
            Ok(EiResult {
                value: -e1.value,
                est_abs_error: e1.est_abs_error,
            })
        }
    } else if x <= positive_series_limit::<T>() {
        Ok(power_series(x))
    } else {
        Ok(asymptotic(x))
    }
}

/// Convenience wrapper returning only the value.
pub fn ei_value<T: Real>(x: T) -> Result<T> {
    ei(x).map(|r| r.value)
}

/// `E1(x) = -Ei(-x)` for `x > 0`.
pub fn e1<T: Real>(x: T) -> Result<EiResult<T>> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::Domain(format!("E1 requires finite x > 0, got {x}")));
    }
    let r = ei(-x)?;
    Ok(EiResult {
        value: -r.value,
        est_abs_error: r.est_abs_error,
    })
}

/// Neumaier-compensated accumulator.
struct CompensatedSum<T> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    fn new(init: T) -> Self {
        Self {
            sum: init,
            comp: T::zero(),
        }
    }

    fn add(&mut self, v: T) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum + self.comp
    }
}

fn power_series<T: Real>(x: T) -> EiResult<T> {
    let eps = T::epsilon();
    let stop = eps / T::lit(16.0);
    let log_abs = x.abs().ln();
    let mut acc = CompensatedSum::new(T::EULER_GAMMA);
    acc.add(log_abs);
    // Σ|terms| bounds the rounding error of an alternating sum.
    let mut magnitude = T::EULER_GAMMA + log_abs.abs();
    let mut power_over_fact = T::one();
    let mut n_terms = 0usize;
    for n in 1..=MAX_ITER {
        let nf = T::from_usize_lossy(n);
        power_over_fact = power_over_fact * x / nf;
        let term = power_over_fact / nf;
        acc.add(term);
        magnitude += term.abs();
        n_terms = n;
        if term.abs() < stop * acc.value().abs() {
            break;
        }
    }
    EiResult {
        value: acc.value(),
        est_abs_error: eps * magnitude * T::lit(2.0) + eps * T::from_usize_lossy(n_terms).sqrt() * acc.value().abs(),
    }
}

/// `E1(x)` for `x > 1` by the modified Lentz algorithm on
/// `E1(x) = e^{-x} · 1/(x+1- 1²/(x+3- 2²/(x+5- …)))`.
fn e1_continued_fraction<T: Real>(x: T) -> Result<EiResult<T>> {
    let eps = T::epsilon();
    let tiny = T::min_positive_value() / eps;
    let two = T::lit(2.0);
    let mut b = x + T::one();
    let mut c = T::one() / tiny;
    let mut d = T::one() / b;
    let mut h = d;
    let mut iters = 0usize;
    for i in 1..=MAX_ITER {
        let i_f = T::from_usize_lossy(i);
        let an = -i_f * i_f;
        b += two;
        d = T::one() / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h = h * del;
        iters = i;
        if (del - T::one()).abs() <= eps {
            let value = h * (-x).exp();
            let est = value.abs() * eps * T::from_usize_lossy(iters + 4).sqrt() * T::lit(2.0);
            return Ok(EiResult {
                value,
                est_abs_error: est,
            });
        }
    }
    Err(Error::Domain(format!(
        "E1 continued fraction did not converge at x = {x} after {iters} iterations"
    )))
}

fn asymptotic<T: Real>(x: T) -> EiResult<T> {
    let eps = T::epsilon();
    let mut acc = CompensatedSum::new(T::one());
    let mut term = T::one();
    let mut last = T::one();
    for k in 1..=MAX_ITER {
        let prev = term;
        term = term * T::from_usize_lossy(k) / x;
        if term >= prev {
            break;
        }
        acc.add(term);
        last = term;
        if term < eps * acc.value() {
            break;
        }
    }
    let scale = x.exp() / x;
    let value = scale * acc.value();
    EiResult {
        value,
        est_abs_error: scale * last + value.abs() * eps * T::lit(4.0),
    }
}
