//! End-to-end pipeline tests: composed sensor timelines through the device
//! loop, and a small train/evaluate round trip on generated data.

use doorslam_core::dsp::mfe_spectrogram;
use doorslam_core::eval::{evaluate, split_dataset, DEFAULT_NOISE_CYCLE};
use doorslam_core::model::{
    init_weights, normalization_stats, train, ModelSpec, Normalization, TrainConfig, TrainedModel,
};
use doorslam_core::synth::{event_time, gen_dataset, gen_event_accel, gen_event_audio, SynthParams};
use doorslam_core::trigger::run_device;
use doorslam_core::{AccelTrace, AudioClip, DspConfig, Label, TriggerConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

const AUDIO_RATE: u32 = 16_000;
const ACCEL_RATE: u32 = 100;

/// Place scheduled events onto quiet accel/audio timelines.
fn compose_timeline(
    events: &[(Label, f64)],
    duration_s: f64,
    seed: u64,
) -> (AccelTrace, AudioClip) {
    let params = SynthParams::default();
    let mut audio = vec![0.0f64; (duration_s * AUDIO_RATE as f64) as usize];
    let n_accel = (duration_s * ACCEL_RATE as f64) as usize;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut accel: Vec<[f64; 3]> = (0..n_accel)
        .map(|_| [noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng)])
        .collect();

    for (k, &(label, at)) in events.iter().enumerate() {
        let child = seed + 1 + k as u64;
        let clip = gen_event_audio(&params, label, child, AUDIO_RATE).unwrap();
        let start = (at * AUDIO_RATE as f64).round() as usize;
        for (i, &s) in clip.samples.iter().enumerate() {
            if start + i < audio.len() {
                audio[start + i] = (audio[start + i] + s).clamp(-1.0, 1.0);
            }
        }

        let trace = gen_event_accel(&params, label, child, ACCEL_RATE, event_time(child)).unwrap();
        let a_start = (at * ACCEL_RATE as f64).round() as usize;
        for (i, s) in trace.samples.iter().enumerate() {
            if a_start + i < accel.len() {
                for axis in 0..3 {
                    accel[a_start + i][axis] += s[axis];
                }
            }
        }
    }

    (
        AccelTrace::new(accel, ACCEL_RATE).unwrap(),
        AudioClip::new(audio, AUDIO_RATE).unwrap(),
    )
}

fn untrained_model() -> TrainedModel {
    let spec = ModelSpec::default_for_input(199, 40);
    let weights = init_weights(&spec, 0).unwrap();
    TrainedModel::new(spec, Normalization::default(), weights).unwrap()
}

#[test]
fn flat_streams_produce_no_events() {
    let (accel, audio) = compose_timeline(&[], 20.0, 1);
    let events = run_device(
        &accel,
        &audio,
        &untrained_model(),
        &TriggerConfig::default(),
        &DspConfig::default(),
    )
    .unwrap();
    assert!(events.is_empty());
}

#[test]
fn one_slam_yields_one_classified_event() {
    let (accel, audio) = compose_timeline(&[(Label::Slam, 5.0)], 15.0, 2);
    let cfg = TriggerConfig::default();
    let events = run_device(&accel, &audio, &untrained_model(), &cfg, &DspConfig::default()).unwrap();
    assert_eq!(events.len(), 1);
    let event = &events[0];
    assert!(event.peak_accel_g >= cfg.threshold_g);
    // The transient sits 0.3 - 1.5 s into the placed clip.
    assert!(event.trigger_t_s >= 5.0 && event.trigger_t_s <= 7.0, "{}", event.trigger_t_s);
    assert!(event.confidence >= 0.5 && event.confidence <= 1.0);
    assert!(event.window_offset_s >= 0.0);
    assert!(event.window_offset_s <= cfg.capture_duration_s - cfg.window_s);
}

#[test]
fn three_spaced_slams_yield_three_ordered_events() {
    let schedule = [
        (Label::Slam, 5.0),
        (Label::Slam, 25.0),
        (Label::Slam, 45.0),
    ];
    let (accel, audio) = compose_timeline(&schedule, 60.0, 3);
    let events = run_device(
        &accel,
        &audio,
        &untrained_model(),
        &TriggerConfig::default(),
        &DspConfig::default(),
    )
    .unwrap();
    assert_eq!(events.len(), 3);
    assert!(events.windows(2).all(|w| w[0].trigger_t_s < w[1].trigger_t_s));
}

#[test]
fn normal_close_never_triggers_alongside_slams() {
    let schedule = [(Label::Normal, 5.0), (Label::Slam, 25.0)];
    let (accel, audio) = compose_timeline(&schedule, 45.0, 4);
    let events = run_device(
        &accel,
        &audio,
        &untrained_model(),
        &TriggerConfig::default(),
        &DspConfig::default(),
    )
    .unwrap();
    assert_eq!(events.len(), 1);
    assert!(events[0].trigger_t_s > 25.0);
}

#[test]
fn audio_must_cover_the_accel_span() {
    let (accel, audio) = compose_timeline(&[], 20.0, 5);
    let short = AudioClip::new(audio.samples[..10 * AUDIO_RATE as usize].to_vec(), AUDIO_RATE).unwrap();
    assert!(run_device(
        &accel,
        &short,
        &untrained_model(),
        &TriggerConfig::default(),
        &DspConfig::default(),
    )
    .is_err());
}

#[test]
fn generated_dataset_trains_and_round_trips_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams::default();
    let manifest = gen_dataset(&params, 12, 21, dir.path(), AUDIO_RATE).unwrap();
    let clips = manifest.load_clips(dir.path()).unwrap();
    assert_eq!(clips.len(), 24);

    let (train_clips, test_clips) = split_dataset(&clips, 0.25, 21).unwrap();
    assert_eq!(test_clips.len(), 6);

    let dsp_cfg = DspConfig::default();
    let train_set: Vec<_> = train_clips
        .iter()
        .map(|(c, l)| (mfe_spectrogram(c, &dsp_cfg).unwrap(), *l))
        .collect();
    let spectrograms: Vec<_> = train_set.iter().map(|(s, _)| s.clone()).collect();

    let spec = ModelSpec::default_for_input(199, 40);
    let cfg = TrainConfig {
        epochs: 10,
        batch_size: 8,
        rng_seed: 21,
        norm: normalization_stats(&spectrograms),
        ..TrainConfig::default()
    };
    let (weights, history) = train(&spec, &train_set, &cfg).unwrap();
    assert_eq!(history.len(), 10);
    assert!(history.last().unwrap().mean_loss < history[0].mean_loss);

    let model = TrainedModel::new(spec, cfg.norm, weights).unwrap();
    let row = evaluate(&model, &test_clips, 0.0, &DEFAULT_NOISE_CYCLE, &dsp_cfg, 21).unwrap();
    assert!(row.accuracy >= 0.5, "accuracy {}", row.accuracy);

    // Save/load preserves behaviour bitwise.
    let path = dir.path().join("model.json");
    model.save(&path).unwrap();
    let loaded = TrainedModel::load(&path).unwrap();
    assert_eq!(loaded, model);
    let again = evaluate(&loaded, &test_clips, 0.0, &DEFAULT_NOISE_CYCLE, &dsp_cfg, 21).unwrap();
    assert_eq!(again, row);
}
