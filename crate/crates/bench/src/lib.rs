//! Shared fixtures for the pipeline benchmarks.

use doorslam_core::model::{init_weights, normalization_stats, Normalization};
use doorslam_core::synth::{gen_event_audio, SynthParams};
use doorslam_core::{AudioClip, DspConfig, Label, ModelSpec, TrainedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn slam_clip(seed: u64) -> AudioClip {
    gen_event_audio(&SynthParams::default(), Label::Slam, seed, 16_000).expect("slam clip")
}

pub fn random_frame(seed: u64, len: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect()
}

/// Untrained default model over the standard 199x40 input, normalized to
/// the fixture clip's statistics.
pub fn fixture_model() -> TrainedModel {
    let spec = ModelSpec::default_for_input(199, 40);
    let weights = init_weights(&spec, 0).expect("weights");
    let spectrogram =
        doorslam_core::dsp::mfe_spectrogram(&slam_clip(0), &DspConfig::default()).expect("mfe");
    let norm: Normalization = normalization_stats(std::slice::from_ref(&spectrogram));
    TrainedModel::new(spec, norm, weights).expect("model")
}
