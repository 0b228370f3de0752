use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use interp_sde::metrics::{average_trajectories, dsnr_trajectory, si_metrics, snr_db, DsnrPoint};
use interp_sde::oracles::ConditionalScore;
use interp_sde::sampling::{forward_em_moments, reverse_pc};
use interp_sde::signal::{mix_at_snr, read_wav, synthetic_mixture, write_wav};
use interp_sde::verify::{run_verify, Check, VerifyConfig, VerifyReport};
use interp_sde::{AudioBuffer, Complex64, Decibels, ProcessParams, SiDecomposition, SpectralPipeline};
use log::{info, warn};
use serde::Serialize;

use crate::config::{Preset, SessionConfig};
use crate::output::{create_csv, num, write_json};

pub const METRICS_SCHEMA_VERSION: u32 = 1;

/// Samples per synthetic signal (2 s at 16 kHz).
pub const SYNTHETIC_SAMPLES: usize = 32_000;

fn process_comment(p: &ProcessParams) -> String {
    match p.gamma() {
        Some(g) => format!("process: variant={} gamma={g} c={} k={} T={}", p.variant(), p.c(), p.k(), p.t_max()),
        None => format!("process: variant={} c={} k={} T={}", p.variant(), p.c(), p.k(), p.t_max()),
    }
}

fn seed_comment(cfg: &SessionConfig) -> String {
    format!("seed: {}", cfg.seed)
}

/// `n` points from 0 to `T` inclusive.
pub fn analyze(cfg: &SessionConfig, out: &Path, compare: bool, points: usize) -> Result<()> {
    ensure!(points >= 2, "--steps must be at least 2 for analyze");
    let targets: Vec<(ProcessParams, String)> = if compare {
        Preset::ALL
            .iter()
            .map(|p| (p.process(), format!("analyze_{}.csv", p.name())))
            .collect()
    } else {
        vec![(cfg.process, "analyze.csv".to_string())]
    };
    for (p, name) in targets {
        let peak = p.variance_peak()?;
        let comments = vec![
            process_comment(&p),
            seed_comment(cfg),
            format!("variance_peak: t={} var={}", peak.t_star, peak.var_star),
        ];
        let (mut w, path) = create_csv(out, &name, &comments, &["t", "interp_factor", "variance", "diffusion"])?;
        for i in 0..points {
            let t = if i + 1 == points {
                p.t_max()
            } else {
                p.t_max() * i as f64 / (points - 1) as f64
            };
            w.write_record([num(t), num(p.interp_factor(t)?), num(p.kernel_var(t)?), num(p.diffusion(t))])?;
        }
        w.flush()?;
        info!(
            "{}: variance peak {:.5} at t = {:.4}; wrote {}",
            p.variant(),
            peak.var_star,
            peak.t_star,
            path.display()
        );
    }
    Ok(())
}

pub struct VerifyOptions {
    pub steps: Option<usize>,
    pub paths: Option<usize>,
    pub compare: bool,
    pub corrupt_variance: Option<f64>,
}

/// Returns whether every check passed.
pub fn verify(cfg: &SessionConfig, out: &Path, opts: &VerifyOptions) -> Result<bool> {
    let mut vc = VerifyConfig {
        seed: cfg.seed,
        corrupt_variance: opts.corrupt_variance,
        ..VerifyConfig::default()
    };
    if let Some(s) = opts.steps {
        vc.n_steps = s;
    }
    if let Some(p) = opts.paths {
        vc.n_paths = p;
    }
    ensure!(vc.n_steps >= 10 && vc.n_paths >= 2, "verify needs --steps >= 10 and --paths >= 2");
    let processes: Vec<ProcessParams> = if opts.compare {
        Preset::ALL.iter().map(|p| p.process()).collect()
    } else {
        vec![cfg.process]
    };
    let reports: Vec<VerifyReport> = processes
        .iter()
        .map(|p| run_verify(p, &vc))
        .collect::<interp_sde::Result<_>>()?;
    let mut comments = vec![seed_comment(cfg)];
    comments.extend(processes.iter().map(process_comment));
    let (mut w, _) = create_csv(out, "verify.csv", &comments, &["t", "stat_name", "value", "stderr"])?;
    for r in &reports {
        for c in &r.checks {
            w.write_record(check_row(r, c))?;
        }
    }
    w.flush()?;
    let path = write_json(out, "verify_report.json", &reports)?;
    let mut all = true;
    for r in &reports {
        for c in r.failures() {
            warn!("{}: FAIL {} (estimate {}, target {})", r.process.variant(), c.name, c.estimate, c.target);
        }
        info!(
            "{}: {} checks, {}",
            r.process.variant(),
            r.checks.len(),
            if r.passed { "all passed" } else { "FAILED" }
        );
        all &= r.passed;
    }
    info!("wrote {}", path.display());
    Ok(all)
}

fn check_row(r: &VerifyReport, c: &Check) -> [String; 4] {
    [
        c.t.map(num).unwrap_or_default(),
        format!("{}/{}", r.process.variant(), c.name),
        num(c.estimate),
        c.stderr.map(num).unwrap_or_default(),
    ]
}

const SIM_X0: Complex64 = Complex64::new(0.3, 0.2);
const SIM_Y: Complex64 = Complex64::new(1.0, -0.5);

/// Forward Euler–Maruyama moments at ten evenly spaced snapshots next to
/// the closed forms.
pub fn simulate(cfg: &SessionConfig, out: &Path, steps: usize, paths: usize) -> Result<()> {
    ensure!(steps >= 10 && paths >= 2, "simulate needs --steps >= 10 and --paths >= 2");
    let p = &cfg.process;
    let snaps: Vec<usize> = (1..=10).map(|j| j * steps / 10).collect();
    let moments = forward_em_moments(p, SIM_X0, SIM_Y, paths, steps, &snaps, cfg.seed)?;
    let comments = vec![
        process_comment(p),
        seed_comment(cfg),
        format!("x0: {} {}  y: {} {}  paths: {paths}  steps: {steps}", SIM_X0.re, SIM_X0.im, SIM_Y.re, SIM_Y.im),
    ];
    let (mut w, path) = create_csv(out, "simulate.csv", &comments, &["t", "stat_name", "value", "stderr"])?;
    let h = p.t_max() / steps as f64;
    for (&i, m) in snaps.iter().zip(&moments) {
        let t = if i == steps { p.t_max() } else { h * i as f64 };
        let mean = p.kernel_mean_scalar(SIM_X0, SIM_Y, t)?;
        let var = p.kernel_var(t)?;
        let rows = [
            ("em_mean_re", m.mean_re.mean, m.mean_re.stderr),
            ("em_mean_im", m.mean_im.mean, m.mean_im.stderr),
            ("em_var", m.var.mean, m.var.stderr),
            ("closed_mean_re", mean.re, 0.0),
            ("closed_mean_im", mean.im, 0.0),
            ("closed_var", var, 0.0),
        ];
        for (name, v, se) in rows {
            w.write_record([num(t), name.to_string(), num(v), num(se)])?;
        }
    }
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

/// Clean/noise pair with a label.
struct Source {
    label: String,
    clean: AudioBuffer,
    noise: AudioBuffer,
}

fn wav_pairs(clean: &[PathBuf], noise: &[PathBuf]) -> Result<Vec<Source>> {
    ensure!(
        clean.len() == noise.len(),
        "got {} --clean files but {} --noise files",
        clean.len(),
        noise.len()
    );
    clean
        .iter()
        .zip(noise)
        .map(|(c, n)| {
            let s = read_wav(c).with_context(|| format!("reading {}", c.display()))?;
            let v = read_wav(n).with_context(|| format!("reading {}", n.display()))?;
            ensure!(
                s.len() == v.len(),
                "{} has {} samples but {} has {}",
                c.display(),
                s.len(),
                n.display(),
                v.len()
            );
            Ok(Source {
                label: c.display().to_string(),
                clean: s,
                noise: v,
            })
        })
        .collect()
}

fn synthetic_sources(seed: u64, count: usize, samples: usize) -> Result<Vec<Source>> {
    (0..count)
        .map(|i| {
            let m = synthetic_mixture(seed, i as u64, samples)?;
            Ok(Source {
                label: format!("synthetic:{i}"),
                clean: m.clean,
                noise: m.noise,
            })
        })
        .collect()
}

pub struct MismatchOptions {
    pub synthetic: Option<usize>,
    pub clean: Vec<PathBuf>,
    pub noise: Vec<PathBuf>,
    pub points: usize,
    pub samples: usize,
}

/// ΔSNR(t) averaged in dB over the inputs, for both presets.
pub fn mismatch(cfg: &SessionConfig, out: &Path, opts: &MismatchOptions) -> Result<()> {
    ensure!(opts.points >= 2, "--steps must be at least 2 for mismatch");
    let sources = if opts.clean.is_empty() && opts.noise.is_empty() {
        synthetic_sources(cfg.seed, opts.synthetic.unwrap_or(10), opts.samples)?
    } else {
        if opts.synthetic.is_some() {
            bail!("--synthetic cannot be combined with --clean/--noise");
        }
        wav_pairs(&opts.clean, &opts.noise)?
    };
    ensure!(!sources.is_empty(), "no inputs");
    let pipe = SpectralPipeline::new(cfg.pipeline())?;

    let mut input_snrs = Vec::with_capacity(sources.len());
    for s in &sources {
        let y = s.clean.add(&s.noise)?;
        let snr = snr_db(&y, &s.clean)?
            .finite()
            .with_context(|| format!("{}: mixture equals the clean signal", s.label))?;
        input_snrs.push(snr);
    }
    let mean_snr = input_snrs.iter().sum::<f64>() / input_snrs.len() as f64;

    let comments = vec![
        seed_comment(cfg),
        format!("inputs: {}", sources.len()),
        format!("mean_snr_y_db: {mean_snr}"),
        format!("stft: window={} hop={}  compression: beta={} alpha={}", cfg.stft.window_size, cfg.stft.hop, cfg.compression.beta, cfg.compression.alpha),
        "averaging: dB domain".to_string(),
    ];
    let (mut w, path) = create_csv(out, "mismatch.csv", &comments, &["t", "dsnr_db", "variant"])?;
    for preset in Preset::ALL {
        let p = preset.process();
        let grid: Vec<f64> = (1..=opts.points)
            .map(|i| {
                if i == opts.points {
                    p.t_max()
                } else {
                    p.t_max() * i as f64 / opts.points as f64
                }
            })
            .collect();
        let runs: Vec<Vec<DsnrPoint<f64>>> = sources
            .iter()
            .map(|s| dsnr_trajectory(&p, &pipe, &s.clean, &s.noise, &grid))
            .collect::<interp_sde::Result<_>>()?;
        let avg = average_trajectories(&runs)?;
        if !avg.windows(2).all(|x| x[1].dsnr_db < x[0].dsnr_db) {
            warn!("{}: averaged ΔSNR is not strictly decreasing", p.variant());
        }
        for pt in &avg {
            w.write_record([num(pt.t), num(pt.dsnr_db), p.variant().to_string()])?;
        }
        info!(
            "{}: ΔSNR at t = {} is {:.4} dB",
            p.variant(),
            p.t_max(),
            avg.last().expect("nonempty grid").dsnr_db
        );
    }
    // Reference line: SNR(Y, S) itself, i.e. ΔSNR = 0.
    for t in [0.0, 1.0] {
        w.write_record([num(t), num(0.0), "mixture".to_string()])?;
    }
    w.flush()?;

    let (mut wi, _) = create_csv(out, "mismatch_inputs.csv", &[seed_comment(cfg)], &["index", "source", "snr_db"])?;
    for (i, (s, snr)) in sources.iter().zip(&input_snrs).enumerate() {
        wi.write_record([i.to_string(), s.label.clone(), num(*snr)])?;
    }
    wi.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EnhanceItem {
    source: String,
    output: String,
    samples: usize,
    input_snr_db: f64,
    t_start: f64,
    predictor_steps: usize,
    corrector_steps: usize,
    corrector_skipped: usize,
    clipped_samples: usize,
    mixture: SiDecomposition<f64>,
    enhanced: SiDecomposition<f64>,
    enhanced_snr_db: Decibels<f64>,
}

#[derive(Serialize)]
struct EnhanceReport {
    schema_version: u32,
    score: &'static str,
    oracle: bool,
    seed: u64,
    process: ProcessParams,
    items: Vec<EnhanceItem>,
}

pub struct EnhanceOptions {
    pub clean: Option<PathBuf>,
    pub noise: Option<PathBuf>,
    pub snr_db: Option<f64>,
    pub synthetic: Option<usize>,
    pub samples: usize,
}

/// Reverse sampling with the conditional score of the known clean signal.
pub fn enhance_oracle(cfg: &SessionConfig, out: &Path, opts: &EnhanceOptions) -> Result<()> {
    let sources = match (&opts.clean, &opts.noise, opts.synthetic) {
        (Some(c), Some(n), None) => wav_pairs(std::slice::from_ref(c), std::slice::from_ref(n))?,
        (None, None, Some(count)) => synthetic_sources(cfg.seed, count, opts.samples)?,
        (None, None, None) => synthetic_sources(cfg.seed, 1, opts.samples)?,
        _ => bail!("give either --clean and --noise, or --synthetic <n>"),
    };
    let pipe = SpectralPipeline::new(cfg.pipeline())?;
    let rc = cfg.reverse_config();
    let params = cfg.process;
    let mut items = Vec::new();
    for (i, src) in sources.iter().enumerate() {
        let (y, noise) = match opts.snr_db {
            Some(q) => mix_at_snr(&src.clean, &src.noise, q)?,
            None => (src.clean.add(&src.noise)?, src.noise.clone()),
        };
        let (s_spec, pad) = pipe.analyze(&src.clean)?;
        let (y_spec, _) = pipe.analyze(&y)?;
        let score = ConditionalScore { params, x0: &s_spec };
        let mut run_cfg = rc;
        run_cfg.seed = rc.seed.wrapping_add(i as u64);
        let outcome = reverse_pc(&params, &y_spec, &score, &run_cfg)?;
        info!(
            "{}: predictor steps: {} (t_start = {}), corrector steps: {}",
            src.label, outcome.predictor_steps, outcome.t_start, outcome.corrector_steps
        );
        let wave = pipe.synthesize(&outcome.estimate, &pad, y.sample_rate())?;
        let stem = if sources.len() == 1 { String::new() } else { format!("_{i}") };
        let out_name = format!("enhanced{stem}.wav");
        let clipped = write_wav(&out.join(&out_name), &wave)?;
        write_wav(&out.join(format!("mixture{stem}.wav")), &y)?;
        write_wav(&out.join(format!("clean{stem}.wav")), &src.clean)?;
        write_wav(&out.join(format!("noise{stem}.wav")), &noise)?;
        if clipped > 0 {
            warn!("{out_name}: {clipped} samples clipped");
        }
        items.push(EnhanceItem {
            source: src.label.clone(),
            output: out_name,
            samples: wave.len(),
            input_snr_db: snr_db(&y, &src.clean)?.finite().unwrap_or(f64::INFINITY),
            t_start: outcome.t_start,
            predictor_steps: outcome.predictor_steps,
            corrector_steps: outcome.corrector_steps,
            corrector_skipped: outcome.corrector_skipped,
            clipped_samples: clipped,
            mixture: si_metrics(&y, &src.clean, &noise)?,
            enhanced: si_metrics(&wave, &src.clean, &noise)?,
            enhanced_snr_db: snr_db(&wave, &src.clean)?,
        });
    }
    let report = EnhanceReport {
        schema_version: METRICS_SCHEMA_VERSION,
        score: "conditional oracle: uses the clean target, not a trained model",
        oracle: true,
        seed: cfg.seed,
        process: params,
        items,
    };
    let path = write_json(out, "enhance_metrics.json", &report)?;
    info!("wrote {}", path.display());
    Ok(())
}

pub fn score(cfg: &SessionConfig, out: &Path, estimate: &[PathBuf], clean: &[PathBuf], noise: &[PathBuf]) -> Result<()> {
    ensure!(!estimate.is_empty(), "no --estimate files");
    ensure!(
        estimate.len() == clean.len() && clean.len() == noise.len(),
        "need one --clean and one --noise per --estimate"
    );
    let (mut w, path) = create_csv(out, "score.csv", &[seed_comment(cfg)], &["file", "si_sdr", "si_sir", "si_sar"])?;
    for ((e, c), n) in estimate.iter().zip(clean).zip(noise) {
        let load = |p: &PathBuf| read_wav(p).with_context(|| format!("reading {}", p.display()));
        let d = si_metrics(&load(e)?, &load(c)?, &load(n)?).with_context(|| format!("scoring {}", e.display()))?;
        w.write_record([e.display().to_string(), d.si_sdr.to_string(), d.si_sir.to_string(), d.si_sar.to_string()])?;
    }
    w.flush()?;
    info!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct EiOut {
    x: f64,
    value: f64,
    est_abs_error: f64,
}

pub fn specfun_ei(x: f64) -> Result<()> {
    let r = interp_sde::ei(x)?;
    println!(
        "{}",
        serde_json::to_string(&EiOut {
            x,
            value: r.value,
            est_abs_error: r.est_abs_error
        })?
    );
    Ok(())
}
