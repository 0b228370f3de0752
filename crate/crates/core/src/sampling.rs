//! Forward and reverse stochastic simulation.
//!
//! * [`forward_sample`] draws directly from the Gaussian perturbation kernel.
//! * [`forward_path_em`] integrates the forward SDE with Euler–Maruyama.
//! * [`reverse_pc`] runs the reverse-time predictor–corrector sampler:
//!   an Euler–Maruyama predictor on the reverse SDE and an annealed
//!   Langevin corrector, on the fixed grid `tᵢ = i·h`, `h = T/n`.
//!
//! Every random draw goes through a caller-owned RNG; ensembles derive one
//! ChaCha stream per trajectory from `(seed, index)` so results do not
//! depend on thread scheduling.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sde::ProcessParams;
use crate::stats::ComplexMoments;
use crate::tensor::SpectrogramTensor;

/// Approximation of the conditional score `∇ log p_t(x_t | y)`.
pub trait ScoreFunction<T: Real>: Sync {
    fn score(
        &self,
        x_t: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>>;
}

impl<T, F> ScoreFunction<T> for F
where
    T: Real,
    F: Fn(&SpectrogramTensor<T>, &SpectrogramTensor<T>, T) -> Result<SpectrogramTensor<T>> + Sync,
{
    fn score(
        &self,
        x_t: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>> {
        self(x_t, y, t)
    }
}

/// The score that is identically zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroScore;

impl<T: Real> ScoreFunction<T> for ZeroScore {
    fn score(
        &self,
        x_t: &SpectrogramTensor<T>,
        _y: &SpectrogramTensor<T>,
        _t: T,
    ) -> Result<SpectrogramTensor<T>> {
        let (f, k) = x_t.dims();
        Ok(SpectrogramTensor::zeros(f, k))
    }
}

/// Per-trajectory RNG: stream `index` of the ChaCha generator seeded with `seed`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Reverse sampler settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseConfig<T> {
    /// Reverse starting time, snapped to the nearest multiple of `h`.
    pub t_rs: T,
    /// Grid resolution: `h = T / n_steps_full`, fixed regardless of `t_rs`.
    pub n_steps_full: usize,
    /// Langevin noise-to-score ratio `r`; step `ε = 2 (r‖z‖/‖s‖)²`.
    pub ald_r: T,
    pub corrector_steps_per_predictor: usize,
    pub seed: u64,
}

impl<T: Real> ReverseConfig<T> {
    /// 30 steps, one corrector step with `r = 0.5`, starting at `t_rs`.
    pub fn standard(t_rs: T, seed: u64) -> Self {
        Self {
            t_rs,
            n_steps_full: 30,
            ald_r: T::lit(0.5),
            corrector_steps_per_predictor: 1,
            seed,
        }
    }

    /// Grid step `h = T / n_steps_full`.
    pub fn step_size(&self, params: &ProcessParams<T>) -> T {
        params.t_max() / T::from_usize_lossy(self.n_steps_full)
    }

    pub fn validate(&self, params: &ProcessParams<T>) -> Result<()> {
        if self.n_steps_full == 0 {
            return Err(Error::Config("n_steps_full must be > 0".into()));
        }
        if !(self.ald_r.is_finite() && self.ald_r > T::zero()) {
            return Err(Error::Config(format!("ald_r must be > 0, got {}", self.ald_r)));
        }
        let tol = params.t_max() * T::lit(1e-9);
        if !(self.t_rs > T::zero() && self.t_rs <= params.t_max() + tol) {
            return Err(Error::Config(format!(
                "t_rs must lie in (0, {}], got {}",
                params.t_max(),
                self.t_rs
            )));
        }
        if self.executed_steps_unchecked(params) == 0 {
            return Err(Error::Config(format!(
                "t_rs = {} rounds to zero steps of size {}",
                self.t_rs,
                self.step_size(params)
            )));
        }
        Ok(())
    }

    fn executed_steps_unchecked(&self, params: &ProcessParams<T>) -> usize {
        let ratio = self.t_rs / self.step_size(params);
        ratio.round().to_usize().unwrap_or(0).min(self.n_steps_full)
    }

    /// Number of predictor iterations: `round(t_rs / h)`.
    pub fn executed_steps(&self, params: &ProcessParams<T>) -> Result<usize> {
        self.validate(params)?;
        Ok(self.executed_steps_unchecked(params))
    }

    /// `t_rs` snapped to the grid.
    pub fn snapped_start(&self, params: &ProcessParams<T>) -> Result<T> {
        let m = self.executed_steps(params)?;
        Ok(grid_time(params, self.n_steps_full, m))
    }
}

/// `i·(T/n)`, with the end point pinned to `T` exactly.
fn grid_time<T: Real>(params: &ProcessParams<T>, n: usize, i: usize) -> T {
    if i == n {
        params.t_max()
    } else {
        params.t_max() / T::from_usize_lossy(n) * T::from_usize_lossy(i)
    }
}

/// Sampled path: strictly monotone times with one state per time.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord<T> {
    times: Vec<T>,
    states: Vec<SpectrogramTensor<T>>,
}

impl<T: Real> TrajectoryRecord<T> {
    pub fn new(times: Vec<T>, states: Vec<SpectrogramTensor<T>>) -> Result<Self> {
        if times.len() != states.len() {
            return Err(Error::Shape(format!(
                "{} times for {} states",
                times.len(),
                states.len()
            )));
        }
        let up = times.windows(2).all(|w| w[1] > w[0]);
        let down = times.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::Config("trajectory times must be strictly monotone".into()));
        }
        Ok(Self { times, states })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn states(&self) -> &[SpectrogramTensor<T>] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn is_forward(&self) -> bool {
        self.times.len() < 2 || self.times[1] > self.times[0]
    }

    pub fn last(&self) -> Option<(T, &SpectrogramTensor<T>)> {
        self.times.last().map(|&t| (t, self.states.last().unwrap()))
    }
}

/// One draw from the perturbation kernel: `mean + σ(t)·Z`.
pub fn forward_sample<T: Real, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    x0: &SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    t: T,
    rng: &mut R,
) -> Result<SpectrogramTensor<T>> {
    let mut x = params.kernel_mean(x0, y, t)?;
    let std = params.kernel_std(t)?;
    if std > T::zero() {
        let (f, k) = x.dims();
        let z = SpectrogramTensor::standard_normal(f, k, rng);
        x.axpy(std, &z)?;
    }
    Ok(x)
}

fn em_step<T: Real, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    x: &mut SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    t: T,
    h: T,
    rng: &mut R,
) -> Result<()> {
    let f = params.drift(x, y, t)?;
    x.axpy(h, &f)?;
    let g = params.diffusion(t);
    if g > T::zero() {
        let (fb, k) = x.dims();
        let z = SpectrogramTensor::standard_normal(fb, k, rng);
        x.axpy(g * h.sqrt(), &z)?;
    }
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("forward Euler–Maruyama state at t = {t}")));
    }
    Ok(())
}

/// Euler–Maruyama path of the forward SDE on `tᵢ = i·T/n`, `i = 0..=n`,
/// starting from `X₀ = x0`.
pub fn forward_path_em<T: Real, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    x0: &SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    n_steps: usize,
    rng: &mut R,
) -> Result<TrajectoryRecord<T>> {
    x0.check_same_dims(y)?;
    if n_steps == 0 {
        return Err(Error::Config("n_steps must be >= 1".into()));
    }
    let h = params.t_max() / T::from_usize_lossy(n_steps);
    let mut x = x0.clone();
    let mut times = Vec::with_capacity(n_steps + 1);
    let mut states = Vec::with_capacity(n_steps + 1);
    times.push(T::zero());
    states.push(x.clone());
    for i in 0..n_steps {
        em_step(params, &mut x, y, grid_time(params, n_steps, i), h, rng)?;
        times.push(grid_time(params, n_steps, i + 1));
        states.push(x.clone());
    }
    TrajectoryRecord::new(times, states)
}

/// Like [`forward_path_em`] but keeps only the states after the given step
/// counts (the state at `t = snapshot·T/n`).
pub fn forward_em_snapshots<T: Real, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    x0: &SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    n_steps: usize,
    snapshots: &[usize],
    rng: &mut R,
) -> Result<Vec<SpectrogramTensor<T>>> {
    x0.check_same_dims(y)?;
    if n_steps == 0 || snapshots.iter().any(|&s| s > n_steps) {
        return Err(Error::Config(format!(
            "snapshots {snapshots:?} must lie in 0..={n_steps} with n_steps >= 1"
        )));
    }
    let h = params.t_max() / T::from_usize_lossy(n_steps);
    let last = snapshots.iter().copied().max().unwrap_or(0);
    let mut x = x0.clone();
    let mut out = vec![None; snapshots.len()];
    for i in 0..=last {
        for (slot, &s) in out.iter_mut().zip(snapshots) {
            if s == i {
                *slot = Some(x.clone());
            }
        }
        if i < last {
            em_step(params, &mut x, y, grid_time(params, n_steps, i), h, rng)?;
        }
    }
    Ok(out.into_iter().map(|s| s.expect("every snapshot visited")).collect())
}

/// Monte-Carlo moments of the scalar Euler–Maruyama marginals at the given
/// snapshot steps, over `n_paths` paths (parallel, one RNG stream per path).
pub fn forward_em_moments<T: Real>(
    params: &ProcessParams<T>,
    x0: Complex<T>,
    y: Complex<T>,
    n_paths: usize,
    n_steps: usize,
    snapshots: &[usize],
    seed: u64,
) -> Result<Vec<ComplexMoments<T>>> {
    let x0 = SpectrogramTensor::scalar(x0);
    let y = SpectrogramTensor::scalar(y);
    let paths: Vec<Vec<Complex<T>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream_rng(seed, p as u64);
            forward_em_snapshots(params, &x0, &y, n_steps, snapshots, &mut rng)
                .map(|v| v.iter().map(|s| s.get(0, 0)).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..snapshots.len())
        .map(|j| {
            let column: Vec<Complex<T>> = paths.iter().map(|p| p[j]).collect();
            ComplexMoments::from_samples(&column)
        })
        .collect())
}

/// Reverse-process initial state `y + σ(t_rs)·Z`, centred on the observation.
pub fn prior_sample<T: Real, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    y: &SpectrogramTensor<T>,
    t_rs: T,
    rng: &mut R,
) -> Result<SpectrogramTensor<T>> {
    if !(t_rs > T::zero()) {
        return Err(Error::Config(format!("t_rs must be > 0, got {t_rs}")));
    }
    let std = params.kernel_std(t_rs)?;
    let mut x = y.clone();
    if std > T::zero() {
        let (f, k) = y.dims();
        let z = SpectrogramTensor::standard_normal(f, k, rng);
        x.axpy(std, &z)?;
    }
    Ok(x)
}

/// Result of a reverse run.
#[derive(Clone, Debug)]
pub struct ReverseOutcome<T> {
    /// Final state at `t = 0`: the clean-signal estimate.
    pub estimate: SpectrogramTensor<T>,
    /// Grid time the run started from.
    pub t_start: T,
    pub predictor_steps: usize,
    pub corrector_steps: usize,
    /// Corrector steps skipped because the score vanished.
    pub corrector_skipped: usize,
}

fn eval_score<T: Real, S: ScoreFunction<T> + ?Sized>(
    score: &S,
    x: &SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    t: T,
) -> Result<SpectrogramTensor<T>> {
    let s = score.score(x, y, t)?;
    x.check_same_dims(&s)?;
    if !s.is_finite() {
        return Err(Error::NonFinite(format!("score at t = {t}")));
    }
    Ok(s)
}

/// Predictor–corrector reverse run from the sampled prior at `t_rs`.
pub fn reverse_pc<T: Real, S: ScoreFunction<T> + ?Sized>(
    params: &ProcessParams<T>,
    y: &SpectrogramTensor<T>,
    score: &S,
    cfg: &ReverseConfig<T>,
) -> Result<ReverseOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    reverse_pc_with_rng(params, y, score, cfg, &mut rng)
}

/// [`reverse_pc`] drawing from a caller-supplied RNG (`cfg.seed` unused).
pub fn reverse_pc_with_rng<T: Real, S: ScoreFunction<T> + ?Sized, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    y: &SpectrogramTensor<T>,
    score: &S,
    cfg: &ReverseConfig<T>,
    rng: &mut R,
) -> Result<ReverseOutcome<T>> {
    let t_start = cfg.snapped_start(params)?;
    let x = prior_sample(params, y, t_start, rng)?;
    reverse_from(params, x, y, score, cfg, rng)
}

/// Runs the predictor–corrector loop from a given state at the snapped
/// `cfg.t_rs`. At each grid time `tᵢ > 0`, in order:
///
/// 1. corrector (×`corrector_steps_per_predictor`):
///    `x ← x + ε·s + √(2ε)·z`, `ε = 2 (r‖z‖/‖s‖)²`, skipped when `‖s‖ = 0`;
/// 2. predictor: `x ← x + [-f(x, y, tᵢ) + g(tᵢ)²·s]·h + g(tᵢ)·√h·z`.
///
/// The last predictor step (to `t = 0`) returns its mean, without the
/// injected noise term.
pub fn reverse_from<T: Real, S: ScoreFunction<T> + ?Sized, R: Rng + ?Sized>(
    params: &ProcessParams<T>,
    start: SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    score: &S,
    cfg: &ReverseConfig<T>,
    rng: &mut R,
) -> Result<ReverseOutcome<T>> {
    start.check_same_dims(y)?;
    let steps = cfg.executed_steps(params)?;
    let n = cfg.n_steps_full;
    let h = cfg.step_size(params);
    let sqrt_h = h.sqrt();
    let two = T::lit(2.0);
    let (fb, k) = y.dims();
    let mut x = start;
    let mut corrector_steps = 0;
    let mut corrector_skipped = 0;
    for i in (1..=steps).rev() {
        let t = grid_time(params, n, i);
        for _ in 0..cfg.corrector_steps_per_predictor {
            let s = eval_score(score, &x, y, t)?;
            let s_norm = s.norm();
            if s_norm == T::zero() {
                corrector_skipped += 1;
                continue;
            }
            let z = SpectrogramTensor::standard_normal(fb, k, rng);
            let ratio = cfg.ald_r * z.norm() / s_norm;
            let eps = two * ratio * ratio;
            x.axpy(eps, &s)?;
            x.axpy((two * eps).sqrt(), &z)?;
            corrector_steps += 1;
        }
        let s = eval_score(score, &x, y, t)?;
        let f = params.drift(&x, y, t)?;
        let g = params.diffusion(t);
        x.axpy(-h, &f)?;
        x.axpy(g * g * h, &s)?;
        if i > 1 && g > T::zero() {
            let z = SpectrogramTensor::standard_normal(fb, k, rng);
            x.axpy(g * sqrt_h, &z)?;
        }
        if !x.is_finite() {
            return Err(Error::NonFinite(format!("reverse state after step at t = {t}")));
        }
    }
    Ok(ReverseOutcome {
        estimate: x,
        t_start: grid_time(params, n, steps),
        predictor_steps: steps,
        corrector_steps,
        corrector_skipped,
    })
}

/// `n_runs` independent reverse runs in parallel; run `j` uses
/// `stream_rng(cfg.seed, j)`.
pub fn reverse_pc_ensemble<T: Real, S: ScoreFunction<T> + ?Sized>(
    params: &ProcessParams<T>,
    y: &SpectrogramTensor<T>,
    score: &S,
    cfg: &ReverseConfig<T>,
    n_runs: usize,
) -> Result<Vec<SpectrogramTensor<T>>> {
    (0..n_runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(cfg.seed, j as u64);
            reverse_pc_with_rng(params, y, score, cfg, &mut rng).map(|o| o.estimate)
        })
        .collect()
}
