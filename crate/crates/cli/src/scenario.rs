//! Scenario grammar and timeline composition for the device simulator.
//!
//! A scenario is a list of `label@time_s` entries, e.g.
//! `slam@5,slam@25,normal@45`. Events are placed onto quiet accelerometer
//! and audio timelines; an optional continuous background bed is mixed over
//! the audio afterwards.

use anyhow::{bail, Context, Result};
use doorslam_core::synth::{
    event_time, gen_background, gen_event_accel, gen_event_audio, NoiseKind, SynthParams,
    DEFAULT_ACCEL_RATE_HZ, EVENT_CLIP_S,
};
use doorslam_core::{dsp, AccelTrace, AudioClip, Label, TriggerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Resting accelerometer noise, matching the per-axis noise of generated
/// event traces.
const REST_NOISE_G: f64 = 0.02;

/// One scheduled event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledEvent {
    pub label: Label,
    pub at_s: f64,
}

/// Parse `label@time_s[,label@time_s...]`. An empty string is an empty
/// schedule.
pub fn parse_events(spec: &str) -> Result<Vec<ScheduledEvent>> {
    if spec.trim().is_empty() {
        return Ok(Vec::new());
    }
    spec.split(',')
        .map(|entry| {
            let (label, at) = entry
                .split_once('@')
                .with_context(|| format!("event {entry:?} is not label@time_s"))?;
            let label: Label = label.trim().parse()?;
            let at_s: f64 = at.trim().parse().with_context(|| format!("time in {entry:?}"))?;
            if !(at_s.is_finite() && at_s >= 0.0) {
                bail!("event time {at_s} must be non-negative");
            }
            Ok(ScheduledEvent { label, at_s })
        })
        .collect()
}

/// Composed sensor streams for one simulation run.
pub struct Timeline {
    pub accel: AccelTrace,
    pub audio: AudioClip,
}

/// Build the timeline: events sorted by time, each at least one refractory
/// period apart, every clip inside the duration. Event audio/accel pairs
/// come from the synth generator with child seeds `seed + 1 + k`.
pub fn compose(
    params: &SynthParams,
    trigger_cfg: &TriggerConfig,
    events: &[ScheduledEvent],
    duration_s: f64,
    seed: u64,
    audio_rate_hz: u32,
    background: Option<(NoiseKind, f64)>,
) -> Result<Timeline> {
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        bail!("duration must be positive");
    }
    let mut schedule = events.to_vec();
    schedule.sort_by(|a, b| a.at_s.partial_cmp(&b.at_s).unwrap());
    for window in schedule.windows(2) {
        let gap = window[1].at_s - window[0].at_s;
        if gap < trigger_cfg.refractory_s {
            bail!(
                "events at {} s and {} s are {} s apart; minimum spacing is the refractory \
                 period ({} s)",
                window[0].at_s,
                window[1].at_s,
                gap,
                trigger_cfg.refractory_s
            );
        }
    }
    if let Some(last) = schedule.last() {
        if last.at_s + EVENT_CLIP_S > duration_s {
            bail!(
                "event at {} s does not fit in the {duration_s} s timeline",
                last.at_s
            );
        }
    }

    let mut audio = vec![0.0f64; (duration_s * audio_rate_hz as f64).round() as usize];
    let n_accel = (duration_s * DEFAULT_ACCEL_RATE_HZ as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rest = Normal::new(0.0, REST_NOISE_G).expect("valid sigma");
    let mut accel: Vec<[f64; 3]> = (0..n_accel)
        .map(|_| [rest.sample(&mut rng), rest.sample(&mut rng), rest.sample(&mut rng)])
        .collect();

    for (k, event) in schedule.iter().enumerate() {
        let child_seed = seed.wrapping_add(1 + k as u64);
        let clip = gen_event_audio(params, event.label, child_seed, audio_rate_hz)?;
        let start = (event.at_s * audio_rate_hz as f64).round() as usize;
        for (i, &s) in clip.samples.iter().enumerate() {
            if let Some(slot) = audio.get_mut(start + i) {
                *slot = (*slot + s).clamp(-1.0, 1.0);
            }
        }

        let trace = gen_event_accel(
            params,
            event.label,
            child_seed,
            DEFAULT_ACCEL_RATE_HZ,
            event_time(child_seed),
        )?;
        let a_start = (event.at_s * DEFAULT_ACCEL_RATE_HZ as f64).round() as usize;
        for (i, s) in trace.samples.iter().enumerate() {
            if let Some(slot) = accel.get_mut(a_start + i) {
                for axis in 0..3 {
                    slot[axis] += s[axis];
                }
            }
        }
    }

    let mut audio = AudioClip::new(audio, audio_rate_hz)?;
    if let Some((kind, ratio)) = background {
        // Salted so the bed differs from the accel rest noise stream.
        let bed = gen_background(kind, seed ^ 0xB0A6_BED5_EED5_0000, duration_s, audio_rate_hz)?;
        audio = dsp::mix_background(&audio, &bed, ratio)?;
    }

    Ok(Timeline {
        accel: AccelTrace::new(accel, DEFAULT_ACCEL_RATE_HZ)?,
        audio,
    })
}
