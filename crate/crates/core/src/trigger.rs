//! Accelerometer-triggered capture loop.
//!
//! The device idles until the acceleration magnitude (with one axis
//! optionally ignored — the door swings in a plane) meets the threshold,
//! captures six seconds of audio, extracts the most energetic two-second
//! window for classification, and discards the rest of the capture. A
//! refractory period measured from the trigger instant prevents
//! overlapping captures.

use crate::dsp::{accel_rms, mfe_spectrogram, AccelFeature, AccelTrace, AudioClip, DspConfig};
use crate::error::{Error, Result};
use crate::model::{Label, TrainedModel};
use serde::{Deserialize, Serialize};

/// Window-selection hop inside a capture, in seconds.
pub const WINDOW_HOP_S: f64 = 0.1;

/// Spatial axis to exclude from the trigger magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    None,
}

impl std::str::FromStr for Axis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Axis> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            "none" => Ok(Axis::None),
            other => Err(Error::invalid(format!("unknown axis {other:?}"))),
        }
    }
}

/// Trigger and capture parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerConfig {
    pub threshold_g: f64,
    pub ignored_axis: Axis,
    pub capture_duration_s: f64,
    pub window_s: f64,
    pub refractory_s: f64,
}

impl Default for TriggerConfig {
    fn default() -> Self {
        TriggerConfig {
            threshold_g: 1.8,
            ignored_axis: Axis::Y,
            capture_duration_s: 6.0,
            window_s: 2.0,
            refractory_s: 6.0,
        }
    }
}

impl TriggerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_g > 0.0 && self.threshold_g.is_finite()) {
            return Err(Error::invalid("threshold_g must be positive"));
        }
        if !(self.window_s > 0.0 && self.window_s <= self.capture_duration_s) {
            return Err(Error::invalid("window_s must be in (0, capture_duration_s]"));
        }
        if self.refractory_s.is_nan() || self.refractory_s < self.capture_duration_s {
            return Err(Error::invalid("refractory_s must be >= capture_duration_s"));
        }
        Ok(())
    }
}

/// Euclidean norm over the non-ignored components, in g.
pub fn magnitude(sample: [f64; 3], ignored_axis: Axis) -> f64 {
    let [x, y, z] = sample;
    match ignored_axis {
        Axis::X => (y * y + z * z).sqrt(),
        Axis::Y => (x * x + z * z).sqrt(),
        Axis::Z => (x * x + y * y).sqrt(),
        Axis::None => (x * x + y * y + z * z).sqrt(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Idle,
    Capturing,
    Refractory,
}

/// Observable detector state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorState {
    pub mode: Mode,
    /// Trigger instant of the capture in progress (or just finished).
    pub capture_start_t: f64,
    /// Running maximum magnitude during the capture.
    pub peak_accel_g: f64,
}

/// Event emitted by one detector step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepEvent {
    TriggerFired { t: f64 },
    CaptureComplete { trigger_t: f64, peak_accel_g: f64 },
}

/// Threshold detector. One logical thread of control must feed `step` in
/// strictly increasing time order.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: TriggerConfig,
    state: DetectorState,
    last_t: Option<f64>,
}

impl Detector {
    pub fn new(cfg: TriggerConfig) -> Result<Detector> {
        cfg.validate()?;
        Ok(Detector {
            cfg,
            state: DetectorState {
                mode: Mode::Idle,
                capture_start_t: 0.0,
                peak_accel_g: 0.0,
            },
            last_t: None,
        })
    }

    pub fn state(&self) -> &DetectorState {
        &self.state
    }

    /// Advance by one accelerometer sample. At most one transition happens
    /// per step:
    ///
    /// - Idle -> Capturing when the magnitude meets the threshold
    ///   (emits [`StepEvent::TriggerFired`]);
    /// - Capturing -> Refractory once `capture_duration_s` has elapsed
    ///   (emits [`StepEvent::CaptureComplete`]);
    /// - Refractory -> Idle once `refractory_s` has elapsed since the
    ///   trigger.
    pub fn step(&mut self, t: f64, accel: [f64; 3]) -> Result<Option<StepEvent>> {
        if !t.is_finite() {
            return Err(Error::invalid("timestamp must be finite"));
        }
        if let Some(prev) = self.last_t {
            if t <= prev {
                return Err(Error::invalid(format!(
                    "timestamps must strictly increase: {t} after {prev}"
                )));
            }
        }
        self.last_t = Some(t);

        let mag = magnitude(accel, self.cfg.ignored_axis);
        let event = match self.state.mode {
            Mode::Idle => {
                if mag >= self.cfg.threshold_g {
                    self.state.mode = Mode::Capturing;
                    self.state.capture_start_t = t;
                    self.state.peak_accel_g = mag;
                    Some(StepEvent::TriggerFired { t })
                } else {
                    None
                }
            }
            Mode::Capturing => {
                if t >= self.state.capture_start_t + self.cfg.capture_duration_s {
                    // The sample at the boundary lies outside the capture
                    // span and does not update the peak.
                    self.state.mode = Mode::Refractory;
                    Some(StepEvent::CaptureComplete {
                        trigger_t: self.state.capture_start_t,
                        peak_accel_g: self.state.peak_accel_g,
                    })
                } else {
                    if mag > self.state.peak_accel_g {
                        self.state.peak_accel_g = mag;
                    }
                    None
                }
            }
            Mode::Refractory => {
                if t >= self.state.capture_start_t + self.cfg.refractory_s {
                    self.state.mode = Mode::Idle;
                    self.state.peak_accel_g = 0.0;
                }
                None
            }
        };
        Ok(event)
    }
}

/// The part of a capture that survives: the selected window and summary
/// numbers. The remaining audio of the six-second capture is dropped when
/// this is constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureResult {
    pub trigger_t: f64,
    pub window: AudioClip,
    pub peak_accel_g: f64,
    pub accel_feature: AccelFeature,
}

/// Pick the `window_s`-long segment with the highest energy (sum of squared
/// samples) among start offsets at multiples of `hop_s`. Ties resolve to
/// the earliest offset.
pub fn select_window(capture: &AudioClip, window_s: f64, hop_s: f64) -> Result<(AudioClip, f64)> {
    let rate = capture.sample_rate_hz as f64;
    let win = (window_s * rate).round() as usize;
    let hop = (hop_s * rate).round() as usize;
    if win == 0 || hop == 0 {
        return Err(Error::invalid("window and hop must round to >= 1 sample"));
    }
    if win > capture.samples.len() {
        return Err(Error::invalid(format!(
            "capture of {} samples is shorter than the {win}-sample window",
            capture.samples.len()
        )));
    }

    let mut best_start = 0;
    let mut best_energy = f64::NEG_INFINITY;
    let mut k = 0;
    loop {
        let start = k * hop;
        if start + win > capture.samples.len() {
            break;
        }
        let energy: f64 = capture.samples[start..start + win].iter().map(|s| s * s).sum();
        if energy > best_energy {
            best_energy = energy;
            best_start = start;
        }
        k += 1;
    }

    Ok((capture.segment(best_start, win)?, best_start as f64 / rate))
}

/// Slice the capture span out of the full streams and keep only what the
/// privacy contract allows: the selected window plus summary features.
/// Returns the window offset within the capture alongside.
pub fn extract_capture(
    audio: &AudioClip,
    accel: &AccelTrace,
    trigger_t: f64,
    peak_accel_g: f64,
    cfg: &TriggerConfig,
) -> Result<(CaptureResult, f64)> {
    let audio_rate = audio.sample_rate_hz as f64;
    let start = (trigger_t * audio_rate).round() as usize;
    let len = (cfg.capture_duration_s * audio_rate).round() as usize;
    let capture = audio.segment(start, len).map_err(|_| {
        Error::invalid(format!(
            "audio ends before the capture at t={trigger_t:.3} s completes"
        ))
    })?;
    let (window, offset_s) = select_window(&capture, cfg.window_s, WINDOW_HOP_S)?;

    let accel_rate = accel.rate_hz as f64;
    let a_start = (trigger_t * accel_rate).round() as usize;
    let a_len = (cfg.capture_duration_s * accel_rate).round() as usize;
    let a_end = (a_start + a_len).min(accel.samples.len());
    if a_start >= a_end {
        return Err(Error::invalid("capture span contains no accel samples"));
    }
    let span = AccelTrace {
        rate_hz: accel.rate_hz,
        samples: accel.samples[a_start..a_end].to_vec(),
    };
    let accel_feature = accel_rms(&span)?;

    Ok((
        CaptureResult {
            trigger_t,
            window,
            peak_accel_g,
            accel_feature,
        },
        offset_s,
    ))
}

/// One classified capture, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionEvent {
    pub trigger_t_s: f64,
    pub label: Label,
    pub confidence: f64,
    pub peak_accel_g: f64,
    pub window_offset_s: f64,
}

/// Replay time-aligned accelerometer and audio streams through the trigger
/// loop, classifying the selected window of every completed capture.
///
/// Audio outside the selected windows never reaches the classifier, and the
/// returned events carry no audio at all.
pub fn run_device(
    accel: &AccelTrace,
    audio: &AudioClip,
    model: &TrainedModel,
    cfg: &TriggerConfig,
    dsp_cfg: &DspConfig,
) -> Result<Vec<DetectionEvent>> {
    // Cross-multiplied sample counts: audio must cover the accel span.
    let audio_covers = audio.samples.len() as u64 * accel.rate_hz as u64
        >= accel.samples.len() as u64 * audio.sample_rate_hz as u64;
    if !audio_covers {
        return Err(Error::invalid(format!(
            "audio ({:.3} s) does not cover the accel span ({:.3} s)",
            audio.duration_s(),
            accel.duration_s()
        )));
    }

    let mut detector = Detector::new(cfg.clone())?;
    let mut events = Vec::new();
    for (i, sample) in accel.samples.iter().enumerate() {
        let t = i as f64 / accel.rate_hz as f64;
        if let Some(StepEvent::CaptureComplete { trigger_t, peak_accel_g }) =
            detector.step(t, *sample)?
        {
            let (capture, window_offset_s) =
                extract_capture(audio, accel, trigger_t, peak_accel_g, cfg)?;
            let spectrogram = mfe_spectrogram(&capture.window, dsp_cfg)?;
            let prediction = model.classify(&spectrogram)?;
            events.push(DetectionEvent {
                trigger_t_s: capture.trigger_t,
                label: prediction.label,
                confidence: prediction.confidence,
                peak_accel_g: capture.peak_accel_g,
                window_offset_s,
            });
        }
    }
    Ok(events)
}
