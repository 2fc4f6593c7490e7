//! Trigger state-machine properties and the window-selection oracle.

use doorslam_core::trigger::{
    magnitude, select_window, Axis, Detector, Mode, StepEvent, TriggerConfig, WINDOW_HOP_S,
};
use doorslam_core::AudioClip;
use doorslam_testkit as oracle;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn legal_transition(from: Mode, to: Mode) -> bool {
    matches!(
        (from, to),
        (Mode::Idle, Mode::Idle)
            | (Mode::Idle, Mode::Capturing)
            | (Mode::Capturing, Mode::Capturing)
            | (Mode::Capturing, Mode::Refractory)
            | (Mode::Refractory, Mode::Refractory)
            | (Mode::Refractory, Mode::Idle)
    )
}

proptest! {
    #[test]
    fn state_machine_stays_on_legal_transitions(
        mags in prop::collection::vec(0.0f64..5.0, 1..1500),
    ) {
        let cfg = TriggerConfig::default();
        let mut det = Detector::new(cfg.clone()).unwrap();
        let mut prev = det.state().mode;
        for (i, &m) in mags.iter().enumerate() {
            let t = i as f64 * 0.01;
            let event = det.step(t, [m, 0.0, 0.0]).unwrap();
            let now = det.state().mode;
            prop_assert!(legal_transition(prev, now), "{prev:?} -> {now:?}");
            // Events only on the matching transition.
            match event {
                Some(StepEvent::TriggerFired { .. }) => {
                    prop_assert_eq!(prev, Mode::Idle);
                    prop_assert_eq!(now, Mode::Capturing);
                }
                Some(StepEvent::CaptureComplete { .. }) => {
                    prop_assert_eq!(prev, Mode::Capturing);
                    prop_assert_eq!(now, Mode::Refractory);
                }
                None => {}
            }
            if now != Mode::Idle {
                prop_assert!(det.state().peak_accel_g >= cfg.threshold_g);
            }
            prev = now;
        }
    }

    #[test]
    fn no_trigger_without_a_threshold_crossing(
        mags in prop::collection::vec(0.0f64..1.79, 1..1500),
    ) {
        let mut det = Detector::new(TriggerConfig::default()).unwrap();
        for (i, &m) in mags.iter().enumerate() {
            let event = det.step(i as f64 * 0.01, [m, 0.0, 0.0]).unwrap();
            prop_assert_eq!(event, None);
        }
    }

    #[test]
    fn trigger_count_is_bounded_by_refractory_arithmetic(
        mags in prop::collection::vec(0.0f64..5.0, 100..3000),
    ) {
        let cfg = TriggerConfig::default();
        let mut det = Detector::new(cfg.clone()).unwrap();
        let mut fired = 0usize;
        for (i, &m) in mags.iter().enumerate() {
            if let Some(StepEvent::TriggerFired { .. }) = det.step(i as f64 * 0.01, [m, 0.0, 0.0]).unwrap() {
                fired += 1;
            }
        }
        let duration = mags.len() as f64 * 0.01;
        let bound = (duration / cfg.refractory_s).ceil() as usize;
        prop_assert!(fired <= bound, "{fired} triggers in {duration} s");
    }

    #[test]
    fn magnitude_ignoring_y_is_independent_of_y(
        x in -5.0f64..5.0,
        y1 in -5.0f64..5.0,
        y2 in -5.0f64..5.0,
        z in -5.0f64..5.0,
    ) {
        prop_assert_eq!(magnitude([x, y1, z], Axis::Y), magnitude([x, y2, z], Axis::Y));
    }

    #[test]
    fn window_selection_matches_exhaustive_scan(
        seed in 0u64..500,
        len_s in 3.0f64..8.0,
        constant in prop::bool::ANY,
    ) {
        let rate = 1000u32; // smaller rate keeps the scan cheap
        let n = (len_s * rate as f64) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let samples: Vec<f64> = if constant {
            vec![0.3; n]
        } else {
            (0..n).map(|_| rng.random::<f64>() - 0.5).collect()
        };
        let capture = AudioClip::new(samples.clone(), rate).unwrap();
        let (window, offset_s) = select_window(&capture, 2.0, WINDOW_HOP_S).unwrap();

        let win = (2.0 * rate as f64).round() as usize;
        let hop = (WINDOW_HOP_S * rate as f64).round() as usize;
        let expected = oracle::max_energy_offset(&samples, win, hop);
        prop_assert_eq!(offset_s, expected as f64 / rate as f64);
        prop_assert_eq!(window.samples.len(), win);
        prop_assert_eq!(&window.samples[..], &samples[expected..expected + win]);
    }
}

#[test]
fn selected_window_duration_is_exact() {
    // The privacy contract at the type level: only window_s seconds of
    // audio survive a capture.
    let cfg = TriggerConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let audio = AudioClip::new(
        (0..160_000).map(|_| 0.2 * rng.random::<f64>()).collect(),
        16_000,
    )
    .unwrap();
    let accel = doorslam_core::AccelTrace::new(vec![[0.0; 3]; 1000], 100).unwrap();
    let (capture, offset) =
        doorslam_core::trigger::extract_capture(&audio, &accel, 1.5, 2.2, &cfg).unwrap();
    assert_eq!(
        capture.window.samples.len(),
        (cfg.window_s * 16_000.0) as usize
    );
    assert!(offset >= 0.0 && offset <= cfg.capture_duration_s - cfg.window_s);
}

#[test]
fn detector_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let stream: Vec<[f64; 3]> = (0..2000)
        .map(|_| [4.0 * rng.random::<f64>(), 0.1, 4.0 * rng.random::<f64>()])
        .collect();

    let run = |stream: &[[f64; 3]]| {
        let mut det = Detector::new(TriggerConfig::default()).unwrap();
        stream
            .iter()
            .enumerate()
            .filter_map(|(i, s)| det.step(i as f64 * 0.01, *s).unwrap())
            .collect::<Vec<_>>()
    };
    assert_eq!(run(&stream), run(&stream));
}
