//! Mini-batch gradient-descent training.

use super::{forward_backward, init_weights, ModelSpec, Tensor, Weights};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use crate::model::Label;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Input normalization constants, computed on the training split and
/// stored with the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Default for Normalization {
    fn default() -> Self {
        Normalization { mean: 0.0, std: 1.0 }
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub norm: Normalization,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 30,
            batch_size: 16,
            rng_seed: 0,
            norm: Normalization::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // learning_rate == 0 is allowed: it trains to a no-op, which is
        // useful for wiring tests.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid("learning_rate must be finite and >= 0"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.norm.std > 0.0 && self.norm.std.is_finite() && self.norm.mean.is_finite()) {
            return Err(Error::invalid("normalization needs finite mean and std > 0"));
        }
        Ok(())
    }
}

/// Mean training loss and accuracy for one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// Mean and population standard deviation over every cell of the given
/// spectrograms. The std is floored at 1e-12 so degenerate (constant)
/// datasets still produce a usable configuration.
pub fn normalization_stats(spectrograms: &[MelSpectrogram]) -> Normalization {
    let mut count = 0usize;
    let mut sum = 0.0;
    for s in spectrograms {
        count += s.values.len();
        sum += s.values.iter().sum::<f64>();
    }
    if count == 0 {
        return Normalization::default();
    }
    let mean = sum / count as f64;
    let mut var = 0.0;
    for s in spectrograms {
        var += s.values.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>();
    }
    let std = (var / count as f64).sqrt().max(1e-12);
    Normalization { mean, std }
}

/// Normalize a spectrogram into the network input tensor
/// `[1, n_frames, n_mels]`.
pub fn spectrogram_tensor(spec: &MelSpectrogram, norm: &Normalization) -> Tensor {
    Tensor {
        shape: vec![1, spec.n_frames, spec.n_mels],
        values: spec.values.iter().map(|&v| (v - norm.mean) / norm.std).collect(),
    }
}

/// Train the classifier by mini-batch gradient descent.
///
/// Deterministic given `cfg.rng_seed`: initialization and epoch shuffling
/// both derive from it. Inputs are normalized with `cfg.norm`. Returns the
/// final weights and one [`EpochStats`] entry per epoch (loss and accuracy
/// are measured on the forward passes of that epoch, before each update).
pub fn train(
    spec: &ModelSpec,
    dataset: &[(MelSpectrogram, Label)],
    cfg: &TrainConfig,
) -> Result<(Weights, Vec<EpochStats>)> {
    cfg.validate()?;
    spec.validate_classifier()?;
    if dataset.is_empty() {
        return Err(Error::invalid("training dataset is empty"));
    }
    let slams = dataset.iter().filter(|(_, l)| *l == Label::Slam).count();
    if slams == 0 || slams == dataset.len() {
        return Err(Error::invalid("training dataset must contain both classes"));
    }
    for (s, _) in dataset {
        if (s.n_frames, s.n_mels) != (spec.input_h, spec.input_w) {
            return Err(Error::invalid(format!(
                "spectrogram {}x{} does not match model input {}x{}",
                s.n_frames, s.n_mels, spec.input_h, spec.input_w
            )));
        }
    }

    let inputs: Vec<Tensor> = dataset
        .iter()
        .map(|(s, _)| spectrogram_tensor(s, &cfg.norm))
        .collect();

    let mut weights = init_weights(spec, cfg.rng_seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut correct = 0usize;

        for batch in indices.chunks(cfg.batch_size) {
            let mut grad_sum = weights.zeros_like();
            for &i in batch {
                let label = dataset[i].1;
                let result = forward_backward(spec, &weights, &inputs[i], label)?;
                epoch_loss += result.loss;
                let predicted = super::prediction_from_probabilities(&result.probabilities)?;
                if predicted.label == label {
                    correct += 1;
                }
                grad_sum.add_scaled(1.0, &result.gradients);
            }
            weights.add_scaled(-cfg.learning_rate / batch.len() as f64, &grad_sum);
        }

        history.push(EpochStats {
            mean_loss: epoch_loss / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        });
    }

    Ok((weights, history))
}
