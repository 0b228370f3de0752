//! Analytic score functions and the denoising score-matching loss.
//!
//! Scores use the complex (Wirtinger) convention
//! `s = ∂ log p / ∂x̄ = ½(∂_re + i ∂_im) log p`. For `N_C(μ, v·I)` this is
//! `-(x - μ)/v`, so a kernel draw `μ + σZ` has score `-Z/σ` and the score
//! matching target is `-Z/σ`.

use num_complex::Complex;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampling::ScoreFunction;
use crate::scalar::{complex_standard_normal, Real};
use crate::sde::ProcessParams;
use crate::stats::MeanEstimate;
use crate::tensor::SpectrogramTensor;

fn gaussian_score<T: Real>(
    x_t: &SpectrogramTensor<T>,
    mean: &SpectrogramTensor<T>,
    var: T,
) -> Result<SpectrogramTensor<T>> {
    let inv = T::one() / var;
    x_t.zip_map(mean, |x, m| (m - x) * inv)
}

/// Score of the perturbation kernel `p(x_t | x0, y)`:
/// `-(x_t - mean(t)) / σ(t)²`.
pub fn conditional_score<T: Real>(
    params: &ProcessParams<T>,
    x0: &SpectrogramTensor<T>,
    y: &SpectrogramTensor<T>,
    x_t: &SpectrogramTensor<T>,
    t: T,
) -> Result<SpectrogramTensor<T>> {
    let var = params.kernel_var(t)?;
    if !(var > T::zero()) {
        return Err(Error::Degenerate(format!("kernel variance vanishes at t = {t}")));
    }
    let mean = params.kernel_mean(x0, y, t)?;
    gaussian_score(x_t, &mean, var)
}

/// [`conditional_score`] with a fixed clean target, usable as a sampler
/// score. This is a cheating oracle: it knows `x0`.
#[derive(Clone, Debug)]
pub struct ConditionalScore<'a, T> {
    pub params: ProcessParams<T>,
    pub x0: &'a SpectrogramTensor<T>,
}

impl<T: Real> ScoreFunction<T> for ConditionalScore<'_, T> {
    fn score(
        &self,
        x_t: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>> {
        conditional_score(&self.params, self.x0, y, x_t, t)
    }
}

/// Per-bin Gaussian model: `X₀ ~ N_C(m0, v0)`, `Y = X₀ + N` with
/// `N ~ N_C(0, vn)`, independent across the `F×K` bins.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GaussianToyModel<T> {
    pub m0: Complex<T>,
    pub v0: T,
    pub vn: T,
    pub freq_bins: usize,
    pub frames: usize,
}

impl<T: Real> GaussianToyModel<T> {
    pub fn new(m0: Complex<T>, v0: T, vn: T, freq_bins: usize, frames: usize) -> Result<Self> {
        for (name, v) in [("v0", v0), ("vn", vn)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidParams(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(Self {
            m0,
            v0,
            vn,
            freq_bins,
            frames,
        })
    }

    /// `E[X₀ | Y = y] = m0 + v0/(v0+vn)·(y - m0)`, per bin.
    pub fn posterior_mean(&self, y: &SpectrogramTensor<T>) -> SpectrogramTensor<T> {
        let gain = self.v0 / (self.v0 + self.vn);
        y.map(|yv| self.m0 + (yv - self.m0) * gain)
    }

    /// `Var[X₀ | Y] = v0·vn/(v0+vn)`.
    pub fn posterior_var(&self) -> T {
        self.v0 * self.vn / (self.v0 + self.vn)
    }

    /// Mean and variance of `X_t | Y = y` under the forward process.
    pub fn marginal(
        &self,
        params: &ProcessParams<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<(SpectrogramTensor<T>, T)> {
        let kappa = params.interp_factor(t)?;
        let keep = T::one() - kappa;
        let post = self.posterior_mean(y);
        let mean = post.zip_map(y, |m, yv| m * keep + yv * kappa)?;
        let var = keep * keep * self.posterior_var() + params.kernel_var(t)?;
        Ok((mean, var))
    }

    /// Draws a clean/observed pair.
    pub fn sample_pair<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> (SpectrogramTensor<T>, SpectrogramTensor<T>) {
        let s0 = self.v0.sqrt();
        let sn = self.vn.sqrt();
        let x0 = SpectrogramTensor::from_fn(self.freq_bins, self.frames, |_, _| {
            self.m0 + complex_standard_normal::<T, _>(rng) * s0
        });
        let y = x0.map(|x| x + complex_standard_normal::<T, _>(rng) * sn);
        (x0, y)
    }
}

/// Exact score of `p_t(x_t | y)` for the Gaussian toy model.
pub fn posterior_score<T: Real>(
    model: &GaussianToyModel<T>,
    params: &ProcessParams<T>,
    y: &SpectrogramTensor<T>,
    x_t: &SpectrogramTensor<T>,
    t: T,
) -> Result<SpectrogramTensor<T>> {
    if !(t > T::zero()) {
        return Err(Error::Degenerate("posterior score needs t > 0".into()));
    }
    let (mean, var) = model.marginal(params, y, t)?;
    gaussian_score(x_t, &mean, var)
}

/// [`posterior_score`] as a sampler score.
#[derive(Clone, Copy, Debug)]
pub struct PosteriorScore<T> {
    pub model: GaussianToyModel<T>,
    pub params: ProcessParams<T>,
}

impl<T: Real> ScoreFunction<T> for PosteriorScore<T> {
    fn score(
        &self,
        x_t: &SpectrogramTensor<T>,
        y: &SpectrogramTensor<T>,
        t: T,
    ) -> Result<SpectrogramTensor<T>> {
        posterior_score(&self.model, &self.params, y, x_t, t)
    }
}

/// How diffusion times are drawn for the loss.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum TimeSampling<T> {
    /// `t ~ U[t_eps, T]`.
    Uniform { t_eps: T },
    Fixed(T),
}

impl<T: Real> TimeSampling<T> {
    /// Uniform with the default floor `t_eps = 1e-3`.
    pub fn uniform_default() -> Self {
        TimeSampling::Uniform { t_eps: T::lit(1e-3) }
    }
}

/// Clean/observed pairs over which the loss expectation is taken.
#[derive(Clone, Debug)]
pub struct DsmBatch<T> {
    pairs: Vec<(SpectrogramTensor<T>, SpectrogramTensor<T>)>,
    time: TimeSampling<T>,
}

impl<T: Real> DsmBatch<T> {
    pub fn new(
        pairs: Vec<(SpectrogramTensor<T>, SpectrogramTensor<T>)>,
        time: TimeSampling<T>,
    ) -> Result<Self> {
        let Some((first, _)) = pairs.first() else {
            return Err(Error::Config("DSM batch must be nonempty".into()));
        };
        for (x0, y) in &pairs {
            first.check_same_dims(x0)?;
            first.check_same_dims(y)?;
        }
        match time {
            TimeSampling::Uniform { t_eps } if !(t_eps > T::zero()) => {
                return Err(Error::Config(format!("t_eps must be > 0, got {t_eps}")));
            }
            TimeSampling::Fixed(t) if !(t > T::zero()) => {
                return Err(Error::Config(format!("fixed t must be > 0, got {t}")));
            }
            _ => {}
        }
        Ok(Self { pairs, time })
    }

    pub fn pairs(&self) -> &[(SpectrogramTensor<T>, SpectrogramTensor<T>)] {
        &self.pairs
    }

    pub fn time(&self) -> TimeSampling<T> {
        self.time
    }

    /// Entries per tensor, `d = F·K`.
    pub fn dim(&self) -> usize {
        self.pairs[0].0.len()
    }
}

/// Monte-Carlo estimate of `E‖s(x_t, y, t) + Z/σ(t)‖²` with
/// `x_t = mean(t) + σ(t)·Z`, using `n_mc` draws per batch element.
pub fn dsm_loss<T: Real, S: ScoreFunction<T> + ?Sized, R: Rng + ?Sized>(
    score: &S,
    params: &ProcessParams<T>,
    batch: &DsmBatch<T>,
    n_mc: usize,
    rng: &mut R,
) -> Result<MeanEstimate<T>> {
    if n_mc == 0 {
        return Err(Error::Config("n_mc must be > 0".into()));
    }
    let mut values = Vec::with_capacity(n_mc * batch.pairs.len());
    for (x0, y) in &batch.pairs {
        let (f, k) = x0.dims();
        for _ in 0..n_mc {
            let t = match batch.time {
                TimeSampling::Uniform { t_eps } => rng.gen_range(t_eps.as_f64()..=params.t_max().as_f64()),
                TimeSampling::Fixed(t) => t.as_f64(),
            };
            let t = T::lit(t);
            let std = params.kernel_std(t)?;
            if !(std > T::zero()) {
                return Err(Error::Degenerate(format!("σ(t) = 0 at t = {t}")));
            }
            let z = SpectrogramTensor::standard_normal(f, k, rng);
            let mut x_t = params.kernel_mean(x0, y, t)?;
            x_t.axpy(std, &z)?;
            let mut r = score.score(&x_t, y, t)?;
            r.axpy(T::one() / std, &z)?;
            values.push(r.norm_sqr());
        }
    }
    Ok(MeanEstimate::from_samples(&values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::ZeroScore;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    type P = ProcessParams<f64>;
    type Tn = SpectrogramTensor<f64>;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    /// log N_C(x; mean, var·I) up to a constant.
    fn log_density(x: &Tn, mean: &Tn, var: f64) -> f64 {
        -x.sub(mean).unwrap().norm_sqr() / var
    }

    /// ½(∂_re + i∂_im) of `logp` by central differences.
    fn fd_wirtinger(x: &Tn, logp: impl Fn(&Tn) -> f64) -> Tn {
        let h = 1e-5;
        let mut out = Tn::zeros(x.freq_bins(), x.frames());
        for i in 0..x.len() {
            let mut grad = [0.0; 2];
            for (j, dir) in [c(1.0, 0.0), c(0.0, 1.0)].into_iter().enumerate() {
                let mut xp = x.clone();
                xp.as_mut_slice()[i] += dir * h;
                let mut xm = x.clone();
                xm.as_mut_slice()[i] -= dir * h;
                grad[j] = (logp(&xp) - logp(&xm)) / (2.0 * h);
            }
            out.as_mut_slice()[i] = c(grad[0], grad[1]) * 0.5;
        }
        out
    }

    fn rel(a: &Tn, b: &Tn) -> f64 {
        a.sub(b).unwrap().norm() / b.norm()
    }

    #[test]
    fn conditional_score_vanishes_at_mean() {
        let p = P::bbed_paper();
        let x0 = Tn::filled(2, 3, c(0.1, 0.2));
        let y = Tn::filled(2, 3, c(0.9, -0.3));
        let m = p.kernel_mean(&x0, &y, 0.4).unwrap();
        let s = conditional_score(&p, &x0, &y, &m, 0.4).unwrap();
        assert_eq!(s.norm(), 0.0);
    }

    #[test]
    fn conditional_score_of_kernel_draw_is_minus_z_over_sigma() {
        let p = P::ouve_paper();
        let x0 = Tn::filled(2, 3, c(0.1, 0.2));
        let y = Tn::filled(2, 3, c(0.9, -0.3));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let z = Tn::standard_normal(2, 3, &mut rng);
        let t = 0.6;
        let sigma = p.kernel_std(t).unwrap();
        let mut x = p.kernel_mean(&x0, &y, t).unwrap();
        x.axpy(sigma, &z).unwrap();
        let s = conditional_score(&p, &x0, &y, &x, t).unwrap();
        assert!(rel(&s, &z.scale(-1.0 / sigma)) < 1e-12);
    }

    #[test]
    fn conditional_score_at_zero_variance_is_error() {
        let p = P::bbed_paper();
        let x = Tn::zeros(1, 1);
        assert!(conditional_score(&p, &x, &x, &x, 0.0).is_err());
    }

    #[test]
    fn conditional_score_matches_numerical_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [P::ouve_paper(), P::bbed_paper()] {
            let x0 = Tn::standard_normal(2, 2, &mut rng);
            let y = Tn::standard_normal(2, 2, &mut rng);
            for t in [0.2, 0.55, 0.9] {
                let x = Tn::standard_normal(2, 2, &mut rng);
                let mean = p.kernel_mean(&x0, &y, t).unwrap();
                let var = p.kernel_var(t).unwrap();
                let fd = fd_wirtinger(&x, |v| log_density(v, &mean, var));
                let s = conditional_score(&p, &x0, &y, &x, t).unwrap();
                assert!(rel(&s, &fd) < 1e-5, "t={t}: {}", rel(&s, &fd));
            }
        }
    }

    #[test]
    fn posterior_score_matches_numerical_gradient() {
        let model = GaussianToyModel::new(c(0.3, 0.1), 1.0, 0.5, 2, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for p in [P::ouve_paper(), P::bbed_paper()] {
            let (_, y) = model.sample_pair(&mut rng);
            let x = Tn::standard_normal(2, 2, &mut rng);
            let t = 0.5;
            let (mean, var) = model.marginal(&p, &y, t).unwrap();
            let fd = fd_wirtinger(&x, |v| log_density(v, &mean, var));
            let s = posterior_score(&model, &p, &y, &x, t).unwrap();
            assert!(rel(&s, &fd) < 1e-5);
        }
    }

    #[test]
    fn posterior_score_degenerate_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for p in [P::ouve_paper(), P::bbed_paper()] {
            let y = Tn::standard_normal(3, 2, &mut rng);
            let x = Tn::standard_normal(3, 2, &mut rng);
            let t = 0.5;
            // Noiseless observation: X₀ = y.
            let sharp = GaussianToyModel::new(c(0.3, 0.1), 1.0, 1e-14, 3, 2).unwrap();
            let a = posterior_score(&sharp, &p, &y, &x, t).unwrap();
            let b = conditional_score(&p, &y, &y, &x, t).unwrap();
            assert!(rel(&a, &b) < 1e-8, "{}", rel(&a, &b));
            // Uninformative prior collapsed: X₀ = m0.
            let collapsed = GaussianToyModel::new(c(0.3, 0.1), 1e-14, 1.0, 3, 2).unwrap();
            let m0 = Tn::filled(3, 2, c(0.3, 0.1));
            let a = posterior_score(&collapsed, &p, &y, &x, t).unwrap();
            let b = conditional_score(&p, &m0, &y, &x, t).unwrap();
            assert!(rel(&a, &b) < 1e-8, "{}", rel(&a, &b));
        }
        let m = GaussianToyModel::new(c(0.0, 0.0), 1.0, 1.0, 1, 1).unwrap();
        let z = Tn::zeros(1, 1);
        assert!(posterior_score(&m, &P::bbed_paper(), &z, &z, 0.0).is_err());
        assert!(GaussianToyModel::new(c(0.0, 0.0), 0.0, 1.0, 1, 1).is_err());
    }

    fn batch(time: TimeSampling<f64>) -> DsmBatch<f64> {
        let model = GaussianToyModel::new(c(0.2, -0.1), 0.8, 0.3, 3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pairs = (0..3).map(|_| model.sample_pair(&mut rng)).collect();
        DsmBatch::new(pairs, time).unwrap()
    }

    #[test]
    fn dsm_batch_validation() {
        assert!(DsmBatch::<f64>::new(vec![], TimeSampling::uniform_default()).is_err());
        let a = Tn::zeros(2, 2);
        let b = Tn::zeros(2, 3);
        assert!(DsmBatch::new(vec![(a.clone(), b)], TimeSampling::uniform_default()).is_err());
        assert!(DsmBatch::new(vec![(a.clone(), a.clone())], TimeSampling::Uniform { t_eps: 0.0 }).is_err());
        assert!(DsmBatch::new(vec![(a.clone(), a)], TimeSampling::Fixed(0.0)).is_err());
    }

    #[test]
    fn dsm_loss_of_zero_score_at_fixed_t() {
        let p = P::bbed_paper();
        let t = 0.5;
        let b = batch(TimeSampling::Fixed(t));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let est = dsm_loss(&ZeroScore, &p, &b, 4000, &mut rng).unwrap();
        let want = b.dim() as f64 / p.kernel_var(t).unwrap();
        assert!(est.within(want, 3.0), "{est:?} vs {want}");
    }

    #[test]
    fn dsm_loss_of_offset_score_is_offset_energy() {
        let p = P::ouve_paper();
        let b = batch(TimeSampling::uniform_default());
        let delta = Tn::from_fn(3, 4, |f, k| c(0.01 * f as f64, -0.02 * k as f64));
        let offset = |x: &Tn, y: &Tn, t: f64| -> Result<Tn> {
            let pair = b
                .pairs()
                .iter()
                .find(|(_, yy)| yy == y)
                .expect("observation from the batch");
            conditional_score(&p, &pair.0, y, x, t)?.add(&delta)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let est = dsm_loss(&offset, &p, &b, 2000, &mut rng).unwrap();
        assert!((est.mean - delta.norm_sqr()).abs() < 1e-9, "{est:?}");
    }

    #[test]
    fn dsm_loss_of_conditional_score_vanishes() {
        for p in [P::ouve_paper(), P::bbed_paper()] {
            let b = batch(TimeSampling::uniform_default());
            let oracle = |x: &Tn, y: &Tn, t: f64| -> Result<Tn> {
                let pair = b.pairs().iter().find(|(_, yy)| yy == y).unwrap();
                conditional_score(&p, &pair.0, y, x, t)
            };
            for seed in 0..3 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let est = dsm_loss(&oracle, &p, &b, 500, &mut rng).unwrap();
                assert!(est.mean < 1e-18, "{est:?}");
            }
        }
    }
}
