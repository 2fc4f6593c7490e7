//! Deterministic synthetic data: slam / normal-close clips, matching
//! accelerometer traces, and background-noise beds.
//!
//! Slams are sharp full-band bursts; normal closes are quieter, slower,
//! low-passed ones. Accelerometer pulses are separated by the default
//! trigger threshold by construction, so the trigger carries no
//! classification burden: the audio classes overlap in level and the CNN
//! does the work. Everything derives from the item seed.

use crate::dsp::io::{write_accel_csv, write_wav};
use crate::dsp::{AccelTrace, AudioClip};
use crate::error::{Error, Result};
use crate::model::Label;
use crate::trigger::TriggerConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

/// Every generated event clip is this long.
pub const EVENT_CLIP_S: f64 = 2.0;

/// Accelerometer sampling rate for generated traces.
pub const DEFAULT_ACCEL_RATE_HZ: u32 = 100;

/// Room-tone floor mixed into every clip, drawn independently of the
/// label: broadband microphone noise plus one colored component (mains hum
/// or speech-band babble), each at a log-uniform RMS from this range before
/// peak normalization. Real rooms are never digitally silent, and because
/// the floor carries no class information the classifier has to key on the
/// transient rather than on absolute background level or tone.
const AMBIENT_RMS_RANGE: (f64, f64) = (0.003, 0.04);

/// Envelope and level ranges for one event class. All ranges are sampled
/// uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventShape {
    pub peak_amp: (f64, f64),
    pub attack_ms: (f64, f64),
    pub decay_ms: (f64, f64),
}

/// Generation parameters for both classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub rng_seed: u64,
    pub slam: EventShape,
    pub normal: EventShape,
    pub slam_accel_peak_g: (f64, f64),
    pub normal_accel_peak_g: (f64, f64),
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            rng_seed: 0,
            slam: EventShape {
                peak_amp: (0.6, 1.0),
                attack_ms: (2.0, 6.0),
                decay_ms: (40.0, 120.0),
            },
            normal: EventShape {
                peak_amp: (0.1, 0.35),
                attack_ms: (10.0, 30.0),
                decay_ms: (120.0, 300.0),
            },
            slam_accel_peak_g: (2.0, 4.0),
            normal_accel_peak_g: (0.3, 1.2),
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let ranges = [
            ("slam.peak_amp", self.slam.peak_amp),
            ("slam.attack_ms", self.slam.attack_ms),
            ("slam.decay_ms", self.slam.decay_ms),
            ("normal.peak_amp", self.normal.peak_amp),
            ("normal.attack_ms", self.normal.attack_ms),
            ("normal.decay_ms", self.normal.decay_ms),
            ("slam_accel_peak_g", self.slam_accel_peak_g),
            ("normal_accel_peak_g", self.normal_accel_peak_g),
        ];
        for (name, (lo, hi)) in ranges {
            if !(lo.is_finite() && hi.is_finite() && 0.0 < lo && lo < hi) {
                return Err(Error::invalid(format!("{name} must be a positive range (lo < hi)")));
            }
        }
        if self.slam.peak_amp.1 > 1.0 {
            return Err(Error::invalid("slam.peak_amp must stay within [-1, 1] audio range"));
        }
        let threshold = TriggerConfig::default().threshold_g;
        if self.normal_accel_peak_g.1 >= threshold {
            return Err(Error::invalid(format!(
                "normal accel peaks must stay below the default trigger threshold {threshold} g"
            )));
        }
        if self.slam_accel_peak_g.0 <= threshold {
            return Err(Error::invalid(format!(
                "slam accel peaks must stay above the default trigger threshold {threshold} g"
            )));
        }
        Ok(())
    }

    fn shape(&self, label: Label) -> &EventShape {
        match label {
            Label::Slam => &self.slam,
            Label::Normal => &self.normal,
        }
    }

    fn accel_peak_range(&self, label: Label) -> (f64, f64) {
        match label {
            Label::Slam => self.slam_accel_peak_g,
            Label::Normal => self.normal_accel_peak_g,
        }
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

fn log_uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    (uniform(rng, (lo.ln(), hi.ln()))).exp()
}

/// Transient onset time for the given item seed, uniform in [0.3, 1.5] s.
/// This is the first draw of the audio generator, exposed so the matching
/// accelerometer pulse can be placed at the same instant.
pub fn event_time(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    uniform(&mut rng, (0.3, 1.5))
}

/// One-pole low-pass, applied twice for a steeper rolloff.
fn lowpass(samples: &mut [f64], cutoff_hz: f64, rate_hz: f64) {
    let alpha = 1.0 - (-2.0 * PI * cutoff_hz / rate_hz).exp();
    for _ in 0..2 {
        let mut y = 0.0;
        for s in samples.iter_mut() {
            y += alpha * (*s - y);
            *s = y;
        }
    }
}

/// One-pole high-pass (input minus its low-passed copy), applied twice.
fn highpass(samples: &mut [f64], cutoff_hz: f64, rate_hz: f64) {
    let alpha = 1.0 - (-2.0 * PI * cutoff_hz / rate_hz).exp();
    for _ in 0..2 {
        let mut low = 0.0;
        for s in samples.iter_mut() {
            low += alpha * (*s - low);
            *s -= low;
        }
    }
}

fn rms(samples: &[f64]) -> f64 {
    (samples.iter().map(|s| s * s).sum::<f64>() / samples.len() as f64).sqrt()
}

fn scale_to_rms(samples: &mut [f64], target: f64) {
    let current = rms(samples);
    if current > 0.0 {
        let scale = target / current;
        for s in samples.iter_mut() {
            *s *= scale;
        }
    }
}

/// Generate a 2-second event clip: an exponential attack/decay transient at
/// [`event_time`] over a white-noise carrier (slam) or a 2 kHz low-passed
/// one (normal close), on top of a room-tone floor. The finished clip is
/// scaled so its absolute peak equals the class's drawn peak amplitude.
pub fn gen_event_audio(
    params: &SynthParams,
    label: Label,
    seed: u64,
    rate_hz: u32,
) -> Result<AudioClip> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let event_t = uniform(&mut rng, (0.3, 1.5));

    let shape = params.shape(label);
    let peak = uniform(&mut rng, shape.peak_amp);
    let attack_s = uniform(&mut rng, shape.attack_ms) / 1000.0;
    let decay_s = uniform(&mut rng, shape.decay_ms) / 1000.0;
    let white_rms = log_uniform(&mut rng, AMBIENT_RMS_RANGE);
    let colored_kind = if rng.random::<f64>() < 0.5 { NoiseKind::Hum } else { NoiseKind::Babble };
    let colored_rms = log_uniform(&mut rng, AMBIENT_RMS_RANGE);

    let n = (EVENT_CLIP_S * rate_hz as f64).round() as usize;
    let mut carrier: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
    if label == Label::Normal {
        lowpass(&mut carrier, 2000.0, rate_hz as f64);
    }

    let colored = gen_background(colored_kind, seed ^ 0x517C_C1B7_2722_0A95, EVENT_CLIP_S, rate_hz)?;
    let colored_gain = colored_rms / 0.1; // beds come scaled to RMS 0.1

    // Transient scaled to the drawn class peak first, floor added in final
    // units afterwards: the floor level stays independent of the class. The
    // final joint normalization then only corrects the small wobble the
    // floor adds around the crest.
    let mut transient: Vec<f64> = (0..n)
        .map(|i| {
            let tau = i as f64 / rate_hz as f64 - event_t;
            let envelope = if tau >= 0.0 {
                (1.0 - (-tau / attack_s).exp()) * (-tau / decay_s).exp()
            } else {
                0.0
            };
            envelope * carrier[i]
        })
        .collect();
    let transient_max = transient.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if transient_max > 0.0 {
        let scale = peak / transient_max;
        for s in &mut transient {
            *s *= scale;
        }
    }

    // Uniform noise has RMS = amplitude / sqrt(3).
    let white_amp = white_rms * 3.0_f64.sqrt();
    let mut samples: Vec<f64> = (0..n)
        .map(|i| {
            let white = white_amp * (2.0 * rng.random::<f64>() - 1.0);
            transient[i] + white + colored_gain * colored.samples[i]
        })
        .collect();

    let max_abs = samples.iter().fold(0.0_f64, |m, s| m.max(s.abs()));
    if max_abs > 0.0 {
        let scale = peak / max_abs;
        for s in &mut samples {
            *s *= scale;
        }
    }
    AudioClip::new(samples, rate_hz)
}

/// Generate the matching 2-second accelerometer trace: a half-sine pulse on
/// the x and z axes centered on `event_t` (the door swings in the x-z
/// plane), Gaussian noise at 0.02 g everywhere, and the y axis carrying
/// noise only. The x/z pair is scaled so the peak magnitude (ignoring y)
/// equals the class's drawn peak.
pub fn gen_event_accel(
    params: &SynthParams,
    label: Label,
    seed: u64,
    rate_hz: u32,
    event_t: f64,
) -> Result<AccelTrace> {
    params.validate()?;
    if !(0.0..EVENT_CLIP_S).contains(&event_t) {
        return Err(Error::invalid(format!(
            "event_t {event_t} outside the {EVENT_CLIP_S} s trace span"
        )));
    }
    // Salted seed keeps the accel stream independent of the audio stream
    // for the same item seed.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let peak = uniform(&mut rng, params.accel_peak_range(label));
    let pulse_s = uniform(&mut rng, (50.0, 150.0)) / 1000.0;
    let angle = uniform(&mut rng, (0.0, 2.0 * PI));
    let noise = Normal::new(0.0, 0.02).expect("valid sigma");

    let n = (EVENT_CLIP_S * rate_hz as f64).round() as usize;
    // Snap the pulse crest onto the sample grid so the drawn peak is
    // actually attained.
    let center = (event_t * rate_hz as f64).round();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut z = Vec::with_capacity(n);
    for i in 0..n {
        let tau = (i as f64 - center) / rate_hz as f64 + pulse_s / 2.0;
        let pulse = if (0.0..=pulse_s).contains(&tau) {
            (PI * tau / pulse_s).sin()
        } else {
            0.0
        };
        x.push(angle.cos() * pulse + noise.sample(&mut rng));
        y.push(noise.sample(&mut rng));
        z.push(angle.sin() * pulse + noise.sample(&mut rng));
    }

    let max_mag = x
        .iter()
        .zip(z.iter())
        .fold(0.0_f64, |m, (&a, &b)| m.max((a * a + b * b).sqrt()));
    let scale = peak / max_mag;
    let samples = (0..n)
        .map(|i| [x[i] * scale, y[i], z[i] * scale])
        .collect();
    AccelTrace::new(samples, rate_hz)
}

/// Background-noise flavours for mixing experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    White,
    Hum,
    Babble,
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<NoiseKind> {
        match s {
            "white" => Ok(NoiseKind::White),
            "hum" => Ok(NoiseKind::Hum),
            "babble" => Ok(NoiseKind::Babble),
            other => Err(Error::invalid(format!("unknown background kind {other:?}"))),
        }
    }
}

impl std::fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NoiseKind::White => "white",
            NoiseKind::Hum => "hum",
            NoiseKind::Babble => "babble",
        })
    }
}

/// Generate a background bed at RMS 0.1: uniform white noise, 50 Hz mains
/// hum with harmonics, or band-passed (300-3400 Hz) noise with 4 Hz
/// amplitude modulation.
pub fn gen_background(
    kind: NoiseKind,
    seed: u64,
    duration_s: f64,
    rate_hz: u32,
) -> Result<AudioClip> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::invalid("duration must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (duration_s * rate_hz as f64).round() as usize;
    let rate = rate_hz as f64;

    let mut samples: Vec<f64> = match kind {
        NoiseKind::White => (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect(),
        NoiseKind::Hum => {
            let amps = [1.0, 0.5, 0.25, 0.125];
            let phases: Vec<f64> = (0..amps.len())
                .map(|_| uniform(&mut rng, (0.0, 2.0 * PI)))
                .collect();
            (0..n)
                .map(|i| {
                    let t = i as f64 / rate;
                    amps.iter()
                        .zip(phases.iter())
                        .enumerate()
                        .map(|(k, (a, p))| a * (2.0 * PI * 50.0 * (k + 1) as f64 * t + p).sin())
                        .sum()
                })
                .collect()
        }
        NoiseKind::Babble => {
            let mut noise: Vec<f64> = (0..n).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
            lowpass(&mut noise, 3400.0, rate);
            highpass(&mut noise, 300.0, rate);
            let phase = uniform(&mut rng, (0.0, 2.0 * PI));
            for (i, s) in noise.iter_mut().enumerate() {
                let t = i as f64 / rate;
                *s *= 1.0 + 0.5 * (2.0 * PI * 4.0 * t + phase).sin();
            }
            noise
        }
    };
    scale_to_rms(&mut samples, 0.1);
    AudioClip::new(samples, rate_hz)
}

/// Extend a clip list with noise-mixed views for training: each original
/// clip contributes itself plus one copy mixed with a freshly seeded
/// background (kinds cycling by index) at a ratio drawn uniformly from
/// [0, max_ratio]. Deterministic given the seed.
///
/// Classifiers trained on clean clips alone latch onto absolute band
/// levels and collapse under mixed-in noise; the noisy views force the
/// decision onto the transient itself.
pub fn augment_with_backgrounds(
    clips: &[(AudioClip, Label)],
    max_ratio: f64,
    kinds: &[NoiseKind],
    seed: u64,
) -> Result<Vec<(AudioClip, Label)>> {
    if !(max_ratio >= 0.0 && max_ratio.is_finite()) {
        return Err(Error::invalid("max_ratio must be finite and non-negative"));
    }
    if kinds.is_empty() {
        return Err(Error::invalid("need at least one noise kind"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(clips.len() * 2);
    for (i, (clip, label)) in clips.iter().enumerate() {
        out.push((clip.clone(), *label));
        let kind = kinds[i % kinds.len()];
        let bed = gen_background(
            kind,
            seed.wrapping_add(1 + i as u64),
            clip.duration_s(),
            clip.sample_rate_hz,
        )?;
        let ratio = max_ratio * rng.random::<f64>();
        out.push((crate::dsp::mix_background(clip, &bed, ratio)?, *label));
    }
    Ok(out)
}

/// One generated item of the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub clip_path: String,
    pub accel_path: String,
    pub label: Label,
    pub seed_used: u64,
}

/// Dataset description written next to the generated files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub params: SynthParams,
    pub rate_hz: u32,
    pub n_per_class: usize,
    pub seed: u64,
    pub items: Vec<ManifestItem>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<DatasetManifest> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    /// Read every item's audio clip, resolving paths relative to `base_dir`.
    pub fn load_clips(&self, base_dir: &Path) -> Result<Vec<(AudioClip, Label)>> {
        self.items
            .iter()
            .map(|item| {
                let clip = crate::dsp::io::read_wav(&base_dir.join(&item.clip_path))?;
                Ok((clip, item.label))
            })
            .collect()
    }
}

/// Generate `n_per_class` WAV + CSV pairs per label under `out_dir`, plus
/// `manifest.json`. Item seeds are `seed + index`, so regeneration with the
/// same arguments is byte-identical.
pub fn gen_dataset(
    params: &SynthParams,
    n_per_class: usize,
    seed: u64,
    out_dir: &Path,
    rate_hz: u32,
) -> Result<DatasetManifest> {
    params.validate()?;
    if n_per_class == 0 {
        return Err(Error::invalid("n_per_class must be >= 1"));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut items = Vec::with_capacity(2 * n_per_class);
    for index in 0..2 * n_per_class {
        let label = if index % 2 == 0 { Label::Slam } else { Label::Normal };
        let child_seed = seed.wrapping_add(index as u64);
        let event_t = event_time(child_seed);

        let clip = gen_event_audio(params, label, child_seed, rate_hz)?;
        let trace = gen_event_accel(params, label, child_seed, DEFAULT_ACCEL_RATE_HZ, event_t)?;

        let clip_path = format!("{label}_{index:04}.wav");
        let accel_path = format!("{label}_{index:04}.csv");
        write_wav(&out_dir.join(&clip_path), &clip)?;
        write_accel_csv(&out_dir.join(&accel_path), &trace)?;
        items.push(ManifestItem {
            clip_path,
            accel_path,
            label,
            seed_used: child_seed,
        });
    }

    let manifest = DatasetManifest {
        params: params.clone(),
        rate_hz,
        n_per_class,
        seed,
        items,
    };
    manifest.save(&out_dir.join("manifest.json"))?;
    Ok(manifest)
}
