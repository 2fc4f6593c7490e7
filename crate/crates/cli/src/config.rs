//! Run configuration: built-in defaults, overlaid by a flat
//! `section.key = value` config file, overlaid by command-line flags.
//! Unknown keys in the file are rejected.

use anyhow::{anyhow, bail, Context, Result};
use doorslam_core::trigger::Axis;
use doorslam_core::{DspConfig, SynthParams, TrainConfig, TriggerConfig};
use std::path::Path;

/// Training-data preparation settings beyond the core loop.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentSettings {
    /// Upper bound of the per-view background mix ratio; 0 disables the
    /// noise-mixed training views.
    pub max_ratio: f64,
}

impl Default for AugmentSettings {
    fn default() -> Self {
        AugmentSettings { max_ratio: 0.6 }
    }
}

/// Evaluation-harness settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub test_fraction: f64,
    pub split_seed: u64,
    pub noise_seed: u64,
    pub ratios: Vec<f64>,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            test_fraction: 0.25,
            split_seed: 0,
            noise_seed: 0,
            ratios: vec![0.0, 0.25, 0.5, 1.0],
        }
    }
}

/// Fully merged configuration shared by every subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub audio_rate_hz: u32,
    pub dsp: DspConfig,
    pub trigger: TriggerConfig,
    pub train: TrainConfig,
    pub augment: AugmentSettings,
    pub synth: SynthParams,
    pub eval: EvalSettings,
    pub device_id: u16,
}

impl RunConfig {
    pub fn built_in() -> RunConfig {
        RunConfig {
            audio_rate_hz: 16_000,
            dsp: DspConfig::default(),
            trigger: TriggerConfig::default(),
            train: TrainConfig::default(),
            augment: AugmentSettings::default(),
            synth: SynthParams::default(),
            eval: EvalSettings::default(),
            device_id: 1,
        }
    }

    /// Built-in defaults overlaid with the optional config file.
    pub fn load(config_path: Option<&Path>) -> Result<RunConfig> {
        let mut cfg = RunConfig::built_in();
        if let Some(path) = config_path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            cfg.apply_file(&text)
                .with_context(|| format!("in config {}", path.display()))?;
        }
        Ok(cfg)
    }

    /// Apply one config file. Every key must be a known `section.key`.
    pub fn apply_file(&mut self, text: &str) -> Result<()> {
        let table: toml::Table = text.parse().context("parsing TOML")?;
        for (section, value) in &table {
            let entries = value
                .as_table()
                .ok_or_else(|| anyhow!("top-level key {section:?} is not a section"))?;
            for (key, value) in entries {
                self.apply_key(section, key, value)
                    .with_context(|| format!("key {section}.{key}"))?;
            }
        }
        Ok(())
    }

    fn apply_key(&mut self, section: &str, key: &str, value: &toml::Value) -> Result<()> {
        match (section, key) {
            ("audio", "rate_hz") => self.audio_rate_hz = as_u64(value)? as u32,

            ("dsp", "frame_len") => self.dsp.frame_len = as_usize(value)?,
            ("dsp", "hop_len") => self.dsp.hop_len = as_usize(value)?,
            ("dsp", "fft_size") => self.dsp.fft_size = as_usize(value)?,
            ("dsp", "n_mels") => self.dsp.n_mels = as_usize(value)?,
            ("dsp", "fmin_hz") => self.dsp.fmin_hz = as_f64(value)?,
            ("dsp", "fmax_hz") => self.dsp.fmax_hz = as_f64(value)?,
            ("dsp", "log_floor") => self.dsp.log_floor = as_f64(value)?,

            ("trigger", "threshold_g") => self.trigger.threshold_g = as_f64(value)?,
            ("trigger", "ignored_axis") => {
                self.trigger.ignored_axis = as_str(value)?.parse::<Axis>()?
            }
            ("trigger", "capture_duration_s") => self.trigger.capture_duration_s = as_f64(value)?,
            ("trigger", "window_s") => self.trigger.window_s = as_f64(value)?,
            ("trigger", "refractory_s") => self.trigger.refractory_s = as_f64(value)?,

            ("train", "learning_rate") => self.train.learning_rate = as_f64(value)?,
            ("train", "epochs") => self.train.epochs = as_usize(value)?,
            ("train", "batch_size") => self.train.batch_size = as_usize(value)?,
            ("train", "rng_seed") => self.train.rng_seed = as_u64(value)?,
            ("train", "augment_max_ratio") => self.augment.max_ratio = as_f64(value)?,

            ("synth", "rng_seed") => self.synth.rng_seed = as_u64(value)?,
            ("synth", "slam_peak_amp") => self.synth.slam.peak_amp = as_range(value)?,
            ("synth", "slam_attack_ms") => self.synth.slam.attack_ms = as_range(value)?,
            ("synth", "slam_decay_ms") => self.synth.slam.decay_ms = as_range(value)?,
            ("synth", "normal_peak_amp") => self.synth.normal.peak_amp = as_range(value)?,
            ("synth", "normal_attack_ms") => self.synth.normal.attack_ms = as_range(value)?,
            ("synth", "normal_decay_ms") => self.synth.normal.decay_ms = as_range(value)?,
            ("synth", "slam_accel_peak_g") => self.synth.slam_accel_peak_g = as_range(value)?,
            ("synth", "normal_accel_peak_g") => self.synth.normal_accel_peak_g = as_range(value)?,

            ("eval", "test_fraction") => self.eval.test_fraction = as_f64(value)?,
            ("eval", "split_seed") => self.eval.split_seed = as_u64(value)?,
            ("eval", "noise_seed") => self.eval.noise_seed = as_u64(value)?,
            ("eval", "ratios") => self.eval.ratios = as_f64_array(value)?,

            ("wire", "device_id") => self.device_id = as_u64(value)? as u16,

            _ => bail!("unknown key"),
        }
        Ok(())
    }
}

fn as_f64(value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(f) => Ok(*f),
        toml::Value::Integer(i) => Ok(*i as f64),
        other => bail!("expected a number, got {other}"),
    }
}

fn as_u64(value: &toml::Value) -> Result<u64> {
    match value {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        other => bail!("expected a non-negative integer, got {other}"),
    }
}

fn as_usize(value: &toml::Value) -> Result<usize> {
    Ok(as_u64(value)? as usize)
}

fn as_str(value: &toml::Value) -> Result<&str> {
    value
        .as_str()
        .ok_or_else(|| anyhow!("expected a string, got {value}"))
}

fn as_f64_array(value: &toml::Value) -> Result<Vec<f64>> {
    value
        .as_array()
        .ok_or_else(|| anyhow!("expected an array, got {value}"))?
        .iter()
        .map(as_f64)
        .collect()
}

fn as_range(value: &toml::Value) -> Result<(f64, f64)> {
    let items = as_f64_array(value)?;
    match items[..] {
        [lo, hi] => Ok((lo, hi)),
        _ => bail!("expected a two-element [lo, hi] array"),
    }
}
