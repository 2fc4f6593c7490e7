//! Train/test split, accuracy, and the background-noise robustness sweep.

use crate::dsp::{mfe_spectrogram, mix_background, AudioClip, DspConfig, MelSpectrogram};
use crate::error::{Error, Result};
use crate::model::{Label, Prediction, TrainedModel};
use crate::synth::{gen_background, NoiseKind};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Anything that can label a spectrogram. Lets the harness run against
/// stub models in tests as well as [`TrainedModel`].
pub trait Classifier {
    fn classify(&self, spectrogram: &MelSpectrogram) -> Result<Prediction>;
}

impl Classifier for TrainedModel {
    fn classify(&self, spectrogram: &MelSpectrogram) -> Result<Prediction> {
        TrainedModel::classify(self, spectrogram)
    }
}

/// 2x2 confusion counts, indexed `matrix[truth][predicted]` with slam as
/// the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Confusion {
    pub matrix: [[u32; 2]; 2],
}

impl Confusion {
    pub fn record(&mut self, truth: Label, predicted: Label) {
        self.matrix[truth.index()][predicted.index()] += 1;
    }

    pub fn true_positives(&self) -> u32 {
        self.matrix[1][1]
    }

    pub fn true_negatives(&self) -> u32 {
        self.matrix[0][0]
    }

    pub fn false_positives(&self) -> u32 {
        self.matrix[0][1]
    }

    pub fn false_negatives(&self) -> u32 {
        self.matrix[1][0]
    }

    pub fn total(&self) -> u32 {
        self.matrix.iter().flatten().sum()
    }

    pub fn correct(&self) -> u32 {
        self.true_positives() + self.true_negatives()
    }

    /// (TP + TN) / N as a single division of the integer counts.
    pub fn accuracy(&self) -> f64 {
        self.correct() as f64 / self.total() as f64
    }
}

/// Accuracy and confusion at one noise ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub noise_ratio: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
    pub n_test: u32,
}

/// Full sweep result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model_ref: String,
    pub split_seed: u64,
    pub noise_seed: u64,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// CSV summary, accuracy at four decimal places.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ratio,accuracy,tp,tn,fp,fn\n");
        for row in &self.rows {
            let c = &row.confusion;
            out.push_str(&format!(
                "{},{:.4},{},{},{},{}\n",
                row.noise_ratio,
                row.accuracy,
                c.true_positives(),
                c.true_negatives(),
                c.false_positives(),
                c.false_negatives(),
            ));
        }
        out
    }
}

/// Stratified split: the overall test size is `round(n * fraction)`,
/// apportioned to the two classes by largest remainder so the class balance
/// is preserved within one item. A seeded per-class shuffle picks the test
/// items; both halves keep their original relative order and are disjoint
/// and exhaustive.
#[allow(clippy::type_complexity)]
pub fn split_dataset<T: Clone>(
    items: &[(T, Label)],
    test_fraction: f64,
    seed: u64,
) -> Result<(Vec<(T, Label)>, Vec<(T, Label)>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid("test_fraction must lie strictly between 0 and 1"));
    }
    let slams = items.iter().filter(|(_, l)| *l == Label::Slam).count();
    if slams == 0 || slams == items.len() {
        return Err(Error::invalid("dataset must contain both classes"));
    }

    let total_test = (items.len() as f64 * test_fraction).round() as usize;
    let counts = [items.len() - slams, slams]; // by Label::index()
    let mut per_class = [0usize; 2];
    let mut remainders = [0.0f64; 2];
    for c in 0..2 {
        let exact = counts[c] as f64 * test_fraction;
        per_class[c] = exact.floor() as usize;
        remainders[c] = exact - exact.floor();
    }
    while per_class[0] + per_class[1] < total_test {
        // Larger remainder gets the extra item; exact tie goes to class 0.
        let c = if remainders[1] > remainders[0] { 1 } else { 0 };
        per_class[c] += 1;
        remainders[c] = -1.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut test_indices = BTreeSet::new();
    for label in [Label::Normal, Label::Slam] {
        let mut class_indices: Vec<usize> = items
            .iter()
            .enumerate()
            .filter(|(_, (_, l))| *l == label)
            .map(|(i, _)| i)
            .collect();
        class_indices.shuffle(&mut rng);
        let n_test = per_class[label.index()].min(class_indices.len());
        test_indices.extend(class_indices.into_iter().take(n_test));
    }

    let mut train = Vec::with_capacity(items.len() - test_indices.len());
    let mut test = Vec::with_capacity(test_indices.len());
    for (i, item) in items.iter().enumerate() {
        if test_indices.contains(&i) {
            test.push(item.clone());
        } else {
            train.push(item.clone());
        }
    }
    Ok((train, test))
}

/// Evaluate one noise ratio: each test clip gets a freshly seeded
/// background (kind cycling deterministically by test index), is mixed at
/// `noise_ratio`, featurized, and classified.
pub fn evaluate<C: Classifier>(
    classifier: &C,
    test_set: &[(AudioClip, Label)],
    noise_ratio: f64,
    noise_kinds: &[NoiseKind],
    dsp_cfg: &DspConfig,
    noise_seed: u64,
) -> Result<EvalRow> {
    if test_set.is_empty() {
        return Err(Error::invalid("test set is empty"));
    }
    if noise_kinds.is_empty() {
        return Err(Error::invalid("need at least one noise kind"));
    }

    let mut confusion = Confusion::default();
    for (i, (clip, truth)) in test_set.iter().enumerate() {
        let kind = noise_kinds[i % noise_kinds.len()];
        let noise = gen_background(
            kind,
            noise_seed.wrapping_add(i as u64),
            clip.duration_s(),
            clip.sample_rate_hz,
        )?;
        let mixed = mix_background(clip, &noise, noise_ratio)?;
        let spectrogram = mfe_spectrogram(&mixed, dsp_cfg)?;
        let prediction = classifier.classify(&spectrogram)?;
        confusion.record(*truth, prediction.label);
    }

    Ok(EvalRow {
        noise_ratio,
        accuracy: confusion.accuracy(),
        confusion,
        n_test: confusion.total(),
    })
}

/// Default cycle of background kinds, applied per test index.
pub const DEFAULT_NOISE_CYCLE: [NoiseKind; 3] = [NoiseKind::White, NoiseKind::Hum, NoiseKind::Babble];

/// Run [`evaluate`] once per ratio over a shared test set and noise seed.
#[allow(clippy::too_many_arguments)]
pub fn noise_sweep<C: Classifier>(
    classifier: &C,
    model_ref: &str,
    test_set: &[(AudioClip, Label)],
    ratios: &[f64],
    noise_kinds: &[NoiseKind],
    dsp_cfg: &DspConfig,
    split_seed: u64,
    noise_seed: u64,
) -> Result<EvalReport> {
    let rows = ratios
        .iter()
        .map(|&r| evaluate(classifier, test_set, r, noise_kinds, dsp_cfg, noise_seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport {
        model_ref: model_ref.to_string(),
        split_seed,
        noise_seed,
        rows,
    })
}
