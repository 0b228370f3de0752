//! Session configuration: named presets, optional TOML overrides, and the
//! resolved echo written next to every run's outputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use interp_sde::{CompressionParams, PipelineConfig, ProcessParams, ReverseConfig, StftConfig};
use serde::{Deserialize, Serialize};

pub const RESOLVED_CONFIG_FILE: &str = "resolved_config.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    OuvePaper,
    BbedPaper,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::OuvePaper, Preset::BbedPaper];

    pub fn process(self) -> ProcessParams {
        match self {
            Preset::OuvePaper => ProcessParams::ouve_paper(),
            Preset::BbedPaper => ProcessParams::bbed_paper(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::OuvePaper => "ouve-paper",
            Preset::BbedPaper => "bbed-paper",
        }
    }
}

/// Reverse-sampler settings; the seed comes from the session.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReverseSettings {
    /// Defaults to the process horizon `T`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_rs: Option<f64>,
    pub n_steps_full: usize,
    pub ald_r: f64,
    pub corrector_steps_per_predictor: usize,
}

impl Default for ReverseSettings {
    fn default() -> Self {
        let r = ReverseConfig::standard(1.0, 0);
        Self {
            t_rs: None,
            n_steps_full: r.n_steps_full,
            ald_r: r.ald_r,
            corrector_steps_per_predictor: r.corrector_steps_per_predictor,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IoConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

/// Fully resolved settings for one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub seed: u64,
    pub process: ProcessParams,
    pub stft: StftConfig,
    pub compression: CompressionParams,
    pub reverse: ReverseSettings,
    pub io: IoConfig,
}

/// On-disk form: every section optional; a missing `process` falls back to
/// `preset`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionFile {
    preset: Option<Preset>,
    seed: Option<u64>,
    process: Option<ProcessParams>,
    stft: Option<StftConfig>,
    compression: Option<CompressionParams>,
    reverse: Option<ReverseSettings>,
    io: Option<IoConfig>,
}

impl SessionConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            seed: 0,
            process: preset.process(),
            stft: StftConfig::default(),
            compression: CompressionParams::default(),
            reverse: ReverseSettings::default(),
            io: IoConfig::default(),
        }
    }

    /// Preset (from the flag, else the file, else `bbed-paper`), then the
    /// file's sections on top.
    pub fn load(path: Option<&Path>, preset: Option<Preset>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                toml::from_str::<SessionFile>(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => SessionFile::default(),
        };
        let base = preset.or(file.preset).unwrap_or(Preset::BbedPaper);
        let mut cfg = Self::from_preset(base);
        if preset.is_none() {
            if let Some(p) = file.process {
                cfg.process = p;
            }
        }
        if let Some(s) = file.seed {
            cfg.seed = s;
        }
        if let Some(s) = file.stft {
            cfg.stft = s;
        }
        if let Some(c) = file.compression {
            cfg.compression = c;
        }
        if let Some(r) = file.reverse {
            cfg.reverse = r;
        }
        if let Some(io) = file.io {
            cfg.io = io;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline().validate()?;
        self.reverse_config().validate(&self.process)?;
        if let Some(t) = self.reverse.t_rs {
            if !(t > 0.0 && t <= self.process.t_max()) {
                bail!("reverse.t_rs must lie in (0, {}], got {t}", self.process.t_max());
            }
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            stft: self.stft,
            compression: self.compression,
        }
    }

    pub fn reverse_config(&self) -> ReverseConfig {
        ReverseConfig {
            t_rs: self.reverse.t_rs.unwrap_or(self.process.t_max()),
            n_steps_full: self.reverse.n_steps_full,
            ald_r: self.reverse.ald_r,
            corrector_steps_per_predictor: self.reverse.corrector_steps_per_predictor,
            seed: self.seed,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn write_resolved(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(RESOLVED_CONFIG_FILE);
        fs::write(&path, self.to_toml()?).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}
