//! Subcommand implementations. Flag merging happens in `main`; these take
//! the final configuration. Data goes to stdout (or the named output
//! files), diagnostics to stderr.

use crate::config::RunConfig;
use crate::scenario::{self, ScheduledEvent};
use anyhow::{Context, Result};
use doorslam_core::eval::{noise_sweep, split_dataset, DEFAULT_NOISE_CYCLE};
use doorslam_core::model::{normalization_stats, train, ModelSpec, TrainConfig, TrainedModel};
use doorslam_core::synth::{augment_with_backgrounds, gen_dataset, DatasetManifest, NoiseKind};
use doorslam_core::trigger::run_device;
use doorslam_core::wire::{self, EventFrame};
use doorslam_core::{AudioClip, Label, MelSpectrogram};
use serde_json::json;
use std::io::Write;
use std::path::Path;

/// Generate a dataset and print the manifest path.
pub fn cmd_synth(cfg: &RunConfig, n_per_class: usize, seed: u64, out_dir: &Path) -> Result<()> {
    gen_dataset(&cfg.synth, n_per_class, seed, out_dir, cfg.audio_rate_hz)
        .context("generating dataset")?;
    println!("{}", out_dir.join("manifest.json").display());
    Ok(())
}

fn load_labelled_clips(manifest_path: &Path) -> Result<Vec<(AudioClip, Label)>> {
    let manifest = DatasetManifest::load(manifest_path)
        .with_context(|| format!("loading manifest {}", manifest_path.display()))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    manifest.load_clips(base).context("loading dataset clips")
}

fn featurize(
    cfg: &RunConfig,
    clips: &[(AudioClip, Label)],
) -> Result<Vec<(MelSpectrogram, Label)>> {
    clips
        .iter()
        .map(|(clip, label)| Ok((doorslam_core::dsp::mfe_spectrogram(clip, &cfg.dsp)?, *label)))
        .collect()
}

/// Train on the manifest (minus the held-out split) and save the model.
/// Prints one line per epoch.
pub fn cmd_train(cfg: &RunConfig, manifest_path: &Path, out_model: &Path) -> Result<()> {
    let clips = load_labelled_clips(manifest_path)?;
    let mut train_clips = if cfg.eval.test_fraction > 0.0 {
        split_dataset(&clips, cfg.eval.test_fraction, cfg.eval.split_seed)?.0
    } else {
        clips
    };
    if cfg.augment.max_ratio > 0.0 {
        train_clips = augment_with_backgrounds(
            &train_clips,
            cfg.augment.max_ratio,
            &DEFAULT_NOISE_CYCLE,
            cfg.train.rng_seed,
        )?;
    }

    let dataset = featurize(cfg, &train_clips)?;
    let spectrograms: Vec<MelSpectrogram> = dataset.iter().map(|(s, _)| s.clone()).collect();
    let first = spectrograms
        .first()
        .ok_or_else(|| anyhow::anyhow!("manifest contains no clips"))?;
    let norm = normalization_stats(&spectrograms);
    let spec = ModelSpec::default_for_input(first.n_frames, first.n_mels);

    let train_cfg = TrainConfig { norm, ..cfg.train.clone() };
    let (weights, history) = train(&spec, &dataset, &train_cfg).context("training")?;
    for (i, epoch) in history.iter().enumerate() {
        println!(
            "epoch {}/{}: loss={:.4} accuracy={:.4}",
            i + 1,
            history.len(),
            epoch.mean_loss,
            epoch.accuracy
        );
    }

    let model = TrainedModel::new(spec, norm, weights)?;
    model.save(out_model)?;
    eprintln!("saved model to {}", out_model.display());
    Ok(())
}

/// Noise-robustness sweep over the held-out split. JSON to stdout, or to
/// `--out`; optional CSV summary file.
pub fn cmd_eval(
    cfg: &RunConfig,
    model_path: &Path,
    manifest_path: &Path,
    out: Option<&Path>,
    csv: Option<&Path>,
) -> Result<()> {
    let model = TrainedModel::load(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let clips = load_labelled_clips(manifest_path)?;
    let (_, test_clips) = split_dataset(&clips, cfg.eval.test_fraction, cfg.eval.split_seed)?;

    let report = noise_sweep(
        &model,
        &model_path.display().to_string(),
        &test_clips,
        &cfg.eval.ratios,
        &DEFAULT_NOISE_CYCLE,
        &cfg.dsp,
        cfg.eval.split_seed,
        cfg.eval.noise_seed,
    )?;

    let json = serde_json::to_string_pretty(&report)?;
    match out {
        Some(path) => {
            std::fs::write(path, &json)?;
            eprintln!("wrote report to {}", path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = csv {
        std::fs::write(path, report.to_csv())?;
        eprintln!("wrote summary to {}", path.display());
    }
    Ok(())
}

/// Build a scenario timeline, run the device loop, and write the event log
/// (JSON lines) plus the binary frame stream.
#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    cfg: &RunConfig,
    model_path: &Path,
    scenario_seed: u64,
    duration_s: f64,
    events: &[ScheduledEvent],
    background: Option<(NoiseKind, f64)>,
    out_log: &Path,
    out_frames: &Path,
) -> Result<()> {
    let model = TrainedModel::load(model_path)
        .with_context(|| format!("loading model {}", model_path.display()))?;
    let timeline = scenario::compose(
        &cfg.synth,
        &cfg.trigger,
        events,
        duration_s,
        scenario_seed,
        cfg.audio_rate_hz,
        background,
    )?;

    let detections = run_device(&timeline.accel, &timeline.audio, &model, &cfg.trigger, &cfg.dsp)?;

    let mut log = String::new();
    let mut frames = Vec::with_capacity(detections.len() * wire::FRAME_LEN);
    for (i, event) in detections.iter().enumerate() {
        log.push_str(&serde_json::to_string(event)?);
        log.push('\n');
        let frame = EventFrame::from_event(cfg.device_id, i as u16, event);
        frames.extend_from_slice(&wire::encode(&frame));
    }
    std::fs::write(out_log, log)?;
    std::fs::write(out_frames, frames)?;
    eprintln!(
        "{} event(s); log {}, frames {}",
        detections.len(),
        out_log.display(),
        out_frames.display()
    );
    Ok(())
}

/// Decode a frame file into a human-readable table (the stand-in for the
/// phone app). Optionally appends the decoded events to a JSON-lines log.
pub fn cmd_listen(frames_path: &Path, out_log: Option<&Path>) -> Result<()> {
    let bytes = std::fs::read(frames_path)
        .with_context(|| format!("reading {}", frames_path.display()))?;
    let (frames, diagnostics) = wire::frame_stream_decode(&bytes);

    println!(
        "{:<8} {:<6} {:>12} {:<8} {:>6} {:>8}",
        "device", "seq", "t_ms", "label", "conf", "peak_g"
    );
    for frame in &frames {
        println!(
            "{:<8} {:<6} {:>12} {:<8} {:>6.3} {:>8.3}",
            frame.device_id,
            frame.seq,
            frame.timestamp_ms,
            frame.label,
            wire::q8_to_confidence(frame.confidence_q8),
            frame.peak_accel_milli_g as f64 / 1000.0,
        );
    }
    if diagnostics.skipped_bytes > 0 {
        eprintln!("skipped {} byte(s) of corrupt or trailing data", diagnostics.skipped_bytes);
    }

    if let Some(path) = out_log {
        let mut file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
        for frame in &frames {
            let line = json!({
                "device_id": frame.device_id,
                "seq": frame.seq,
                "trigger_t_s": frame.timestamp_ms as f64 / 1000.0,
                "label": frame.label,
                "confidence": wire::q8_to_confidence(frame.confidence_q8),
                "peak_accel_g": frame.peak_accel_milli_g as f64 / 1000.0,
            });
            writeln!(file, "{line}")?;
        }
    }
    Ok(())
}
