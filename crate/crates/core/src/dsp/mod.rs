//! Signal-processing frontend.
//!
//! The feature path is the classic mel-filter-bank-energy (MFE) chain:
//! frame the clip, apply a Hamming window, zero-pad to the FFT size, take
//! the power spectrum, pool through triangular mel filters, floor, and take
//! the natural log. The accelerometer side contributes a per-axis RMS
//! feature and background mixing supports the noise-robustness experiments.
//!
//! All operations are pure functions of their arguments; identical inputs
//! produce bit-identical outputs.

mod fft;
pub mod io;

pub use fft::fft_power_spectrum;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Mono audio clip, samples nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

impl AudioClip {
    /// Build a clip, checking that the rate is positive and every sample
    /// is finite.
    pub fn new(samples: Vec<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::invalid(format!("non-finite sample at index {i}")));
        }
        Ok(AudioClip { samples, sample_rate_hz })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    /// Contiguous sub-clip of `len` samples starting at `start`.
    pub fn segment(&self, start: usize, len: usize) -> Result<AudioClip> {
        let end = start.checked_add(len).filter(|&e| e <= self.samples.len());
        match end {
            Some(end) => Ok(AudioClip {
                samples: self.samples[start..end].to_vec(),
                sample_rate_hz: self.sample_rate_hz,
            }),
            None => Err(Error::invalid(format!(
                "segment [{start}, {start}+{len}) out of range for clip of {} samples",
                self.samples.len()
            ))),
        }
    }
}

/// Accelerometer trace: (x, y, z) samples in g, uniformly spaced at `rate_hz`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccelTrace {
    pub rate_hz: u32,
    pub samples: Vec<[f64; 3]>,
}

impl AccelTrace {
    pub fn new(samples: Vec<[f64; 3]>, rate_hz: u32) -> Result<Self> {
        if rate_hz == 0 {
            return Err(Error::invalid("accelerometer rate must be positive"));
        }
        if let Some(i) = samples
            .iter()
            .position(|s| s.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::invalid(format!("non-finite accel sample at index {i}")));
        }
        Ok(AccelTrace { rate_hz, samples })
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz as f64
    }
}

/// MFE analysis parameters.
///
/// Defaults: 20 ms frames with 10 ms hop at 16 kHz, 512-point FFT, 40 mel
/// bands over 20 Hz - 8 kHz, floored at 1e-10 before the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DspConfig {
    pub frame_len: usize,
    pub hop_len: usize,
    pub fft_size: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub log_floor: f64,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            frame_len: 320,
            hop_len: 160,
            fft_size: 512,
            n_mels: 40,
            fmin_hz: 20.0,
            fmax_hz: 8000.0,
            log_floor: 1e-10,
        }
    }
}

impl DspConfig {
    /// Check internal consistency against the clip sample rate.
    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        if !self.fft_size.is_power_of_two() || self.fft_size < 2 {
            return Err(Error::invalid("fft_size must be a power of two >= 2"));
        }
        if self.frame_len == 0 || self.frame_len > self.fft_size {
            return Err(Error::invalid("frame_len must be in 1..=fft_size"));
        }
        if self.hop_len == 0 || self.hop_len > self.frame_len {
            return Err(Error::invalid("hop_len must be in 1..=frame_len"));
        }
        if self.n_mels == 0 {
            return Err(Error::invalid("n_mels must be positive"));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz && self.fmax_hz <= nyquist) {
            return Err(Error::invalid(format!(
                "filter bounds must satisfy 0 <= fmin < fmax <= {nyquist} Hz"
            )));
        }
        if self.log_floor.is_nan() || self.log_floor <= 0.0 {
            return Err(Error::invalid("log_floor must be positive"));
        }
        Ok(())
    }
}

/// Log mel-filter-bank energies: `n_frames` rows of `n_mels` values,
/// row-major. Every value is >= ln(log_floor).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MelSpectrogram {
    pub n_frames: usize,
    pub n_mels: usize,
    pub values: Vec<f64>,
}

impl MelSpectrogram {
    pub fn get(&self, frame: usize, mel: usize) -> f64 {
        self.values[frame * self.n_mels + mel]
    }

    /// Mean log-energy per mel band, averaged over time.
    pub fn band_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.n_mels];
        for f in 0..self.n_frames {
            for (m, mean) in means.iter_mut().enumerate() {
                *mean += self.get(f, m);
            }
        }
        for mean in &mut means {
            *mean /= self.n_frames as f64;
        }
        means
    }
}

/// Per-axis root-mean-square of an accelerometer trace, in g.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelFeature {
    pub rms_x: f64,
    pub rms_y: f64,
    pub rms_z: f64,
}

/// Hamming window: w[i] = 0.54 - 0.46*cos(2*pi*i/(n-1)).
pub fn hamming_window(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::invalid("window length must be >= 2"));
    }
    let denom = (n - 1) as f64;
    Ok((0..n)
        .map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / denom).cos())
        .collect())
}

/// Split a clip into overlapping frames of `cfg.frame_len` samples, starting
/// every `cfg.hop_len` samples. The trailing partial frame is discarded.
pub fn frame_signal(clip: &AudioClip, cfg: &DspConfig) -> Result<Vec<Vec<f64>>> {
    if clip.samples.len() < cfg.frame_len {
        return Err(Error::invalid(format!(
            "clip of {} samples is shorter than one frame ({})",
            clip.samples.len(),
            cfg.frame_len
        )));
    }
    let count = 1 + (clip.samples.len() - cfg.frame_len) / cfg.hop_len;
    Ok((0..count)
        .map(|k| clip.samples[k * cfg.hop_len..k * cfg.hop_len + cfg.frame_len].to_vec())
        .collect())
}

/// HTK mel scale: mel(f) = 2595 * log10(1 + f/700).
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0_f64.powf(mel / 2595.0) - 1.0)
}

/// Edge frequencies of the filter bank: `n_mels + 2` points equally spaced
/// on the mel scale between `fmin_hz` and `fmax_hz`, converted back to Hz.
/// Point m+1 is the center frequency of filter m.
pub fn mel_points_hz(cfg: &DspConfig) -> Vec<f64> {
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(cfg.fmax_hz);
    let n_points = cfg.n_mels + 2;
    (0..n_points)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_points - 1) as f64))
        .collect()
}

/// Triangular mel filter bank: `n_mels` rows of `fft_size/2 + 1` weights.
///
/// Filter m rises linearly (in Hz, evaluated at the FFT bin centers) from
/// edge point m to its peak at point m+1 and falls back to zero at point
/// m+2. A configuration whose bands are too narrow to catch any FFT bin is
/// rejected, so every returned row has at least one positive weight.
pub fn mel_filterbank(cfg: &DspConfig, sample_rate_hz: u32) -> Result<Vec<Vec<f64>>> {
    cfg.validate(sample_rate_hz)?;
    let n_bins = cfg.fft_size / 2 + 1;
    let points = mel_points_hz(cfg);
    let bin_hz = sample_rate_hz as f64 / cfg.fft_size as f64;

    let mut bank = Vec::with_capacity(cfg.n_mels);
    for m in 0..cfg.n_mels {
        let (left, center, right) = (points[m], points[m + 1], points[m + 2]);
        let mut row = vec![0.0; n_bins];
        let mut any_positive = false;
        for (k, w) in row.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let weight = if f >= left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f <= right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            if weight > 0.0 {
                any_positive = true;
            }
            *w = weight;
        }
        if !any_positive {
            return Err(Error::invalid(format!(
                "mel band {m} covers no FFT bin; reduce n_mels or increase fft_size"
            )));
        }
        bank.push(row);
    }
    Ok(bank)
}

/// Full MFE pipeline: frame, window, zero-pad, power spectrum, filter bank,
/// floor, natural log.
pub fn mfe_spectrogram(clip: &AudioClip, cfg: &DspConfig) -> Result<MelSpectrogram> {
    cfg.validate(clip.sample_rate_hz)?;
    let window = hamming_window(cfg.frame_len)?;
    let bank = mel_filterbank(cfg, clip.sample_rate_hz)?;
    let frames = frame_signal(clip, cfg)?;

    let mut values = Vec::with_capacity(frames.len() * cfg.n_mels);
    let mut padded = vec![0.0; cfg.fft_size];
    for frame in &frames {
        for (p, (s, w)) in padded.iter_mut().zip(frame.iter().zip(window.iter())) {
            *p = s * w;
        }
        for p in padded.iter_mut().skip(cfg.frame_len) {
            *p = 0.0;
        }
        let power = fft_power_spectrum(&padded)?;
        for row in &bank {
            let energy: f64 = row.iter().zip(power.iter()).map(|(w, p)| w * p).sum();
            values.push(energy.max(cfg.log_floor).ln());
        }
    }
    Ok(MelSpectrogram {
        n_frames: frames.len(),
        n_mels: cfg.n_mels,
        values,
    })
}

/// Per-axis RMS over the whole trace.
pub fn accel_rms(trace: &AccelTrace) -> Result<AccelFeature> {
    if trace.samples.is_empty() {
        return Err(Error::invalid("accel trace is empty"));
    }
    let n = trace.samples.len() as f64;
    let mut sq = [0.0; 3];
    for s in &trace.samples {
        for axis in 0..3 {
            sq[axis] += s[axis] * s[axis];
        }
    }
    Ok(AccelFeature {
        rms_x: (sq[0] / n).sqrt(),
        rms_y: (sq[1] / n).sqrt(),
        rms_z: (sq[2] / n).sqrt(),
    })
}

/// Mix a background bed into a clip at the given relative volume:
/// out[i] = clamp(clip[i] + ratio * noise[i], -1, 1).
///
/// The noise must be at least as long as the clip (extra tail is ignored)
/// and at the same sample rate. Hard clipping mirrors a saturating
/// microphone.
pub fn mix_background(clip: &AudioClip, noise: &AudioClip, ratio: f64) -> Result<AudioClip> {
    if !(ratio >= 0.0 && ratio.is_finite()) {
        return Err(Error::invalid("mix ratio must be a finite non-negative value"));
    }
    if clip.sample_rate_hz != noise.sample_rate_hz {
        return Err(Error::invalid(format!(
            "sample rate mismatch: clip {} Hz vs noise {} Hz",
            clip.sample_rate_hz, noise.sample_rate_hz
        )));
    }
    if noise.samples.len() < clip.samples.len() {
        return Err(Error::invalid(format!(
            "noise ({} samples) shorter than clip ({} samples)",
            noise.samples.len(),
            clip.samples.len()
        )));
    }
    let samples = clip
        .samples
        .iter()
        .zip(noise.samples.iter())
        .map(|(&c, &n)| (c + ratio * n).clamp(-1.0, 1.0))
        .collect();
    Ok(AudioClip {
        samples,
        sample_rate_hz: clip.sample_rate_hz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn clip_of(samples: Vec<f64>) -> AudioClip {
        AudioClip::new(samples, 16_000).unwrap()
    }

    #[test]
    fn hamming_endpoints() {
        let w = hamming_window(3).unwrap();
        assert!((w[0] - 0.08).abs() < 1e-12);
        assert!((w[1] - 1.0).abs() < 1e-12);
        assert!((w[2] - 0.08).abs() < 1e-12);

        let w2 = hamming_window(2).unwrap();
        assert!((w2[0] - 0.08).abs() < 1e-12);
        assert!((w2[1] - 0.08).abs() < 1e-12);
    }

    #[test]
    fn hamming_matches_closed_form_at_320() {
        let w = hamming_window(320).unwrap();
        for (i, &v) in w.iter().enumerate() {
            let expected =
                0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / 319.0).cos();
            assert!((v - expected).abs() < 1e-15);
            assert!((0.08..=1.0).contains(&v));
        }
    }

    #[test]
    fn hamming_rejects_short_window() {
        assert!(hamming_window(1).is_err());
        assert!(hamming_window(0).is_err());
    }

    #[test]
    fn framing_counts() {
        let cfg = DspConfig::default();
        assert_eq!(frame_signal(&clip_of(vec![0.0; 32_000]), &cfg).unwrap().len(), 199);

        let one = frame_signal(&clip_of(vec![0.5; 320]), &cfg).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one[0], vec![0.5; 320]);

        let clip = clip_of((0..480).map(|i| i as f64).collect());
        let two = frame_signal(&clip, &cfg).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[1], clip.samples[160..480].to_vec());
    }

    #[test]
    fn framing_rejects_short_clip() {
        let cfg = DspConfig::default();
        assert!(frame_signal(&clip_of(vec![0.0; 100]), &cfg).is_err());
    }

    #[test]
    fn mel_scale_anchors() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        let expected = 2595.0 * 2.0_f64.log10();
        assert!((hz_to_mel(700.0) - expected).abs() < 1e-9);
    }

    #[test]
    fn filterbank_rejects_fmax_above_nyquist() {
        let cfg = DspConfig {
            fmax_hz: 9000.0,
            ..DspConfig::default()
        };
        assert!(mel_filterbank(&cfg, 16_000).is_err());
    }

    #[test]
    fn filterbank_rows_non_negative_with_positive_weight() {
        let bank = mel_filterbank(&DspConfig::default(), 16_000).unwrap();
        assert_eq!(bank.len(), 40);
        for row in &bank {
            assert_eq!(row.len(), 257);
            assert!(row.iter().all(|&w| w >= 0.0));
            assert!(row.iter().any(|&w| w > 0.0));
        }
    }

    #[test]
    fn silence_spectrogram_sits_on_the_floor() {
        let cfg = DspConfig::default();
        let spec = mfe_spectrogram(&clip_of(vec![0.0; 32_000]), &cfg).unwrap();
        assert_eq!((spec.n_frames, spec.n_mels), (199, 40));
        let floor = cfg.log_floor.ln();
        assert!((floor - (-23.025850929940457)).abs() < 1e-12);
        assert!(spec.values.iter().all(|&v| v == floor));
    }

    #[test]
    fn accel_rms_of_constant_trace() {
        let trace = AccelTrace::new(vec![[1.0, -2.0, 0.5]; 64], 100).unwrap();
        let f = accel_rms(&trace).unwrap();
        assert!((f.rms_x - 1.0).abs() < 1e-12);
        assert!((f.rms_y - 2.0).abs() < 1e-12);
        assert!((f.rms_z - 0.5).abs() < 1e-12);
    }

    #[test]
    fn accel_rms_of_zero_trace_and_empty_error() {
        let trace = AccelTrace::new(vec![[0.0; 3]; 10], 100).unwrap();
        let f = accel_rms(&trace).unwrap();
        assert_eq!((f.rms_x, f.rms_y, f.rms_z), (0.0, 0.0, 0.0));
        assert!(accel_rms(&AccelTrace::new(vec![], 100).unwrap()).is_err());
    }

    #[test]
    fn mixing_arithmetic_and_saturation() {
        let clip = clip_of(vec![0.4, 0.9, -0.2]);
        let noise = clip_of(vec![0.6, 0.9, 0.0, 0.1]);
        let mixed = mix_background(&clip, &noise, 0.5).unwrap();
        assert!((mixed.samples[0] - 0.7).abs() < 1e-15);
        assert_eq!(mixed.samples[1], 1.0); // clamped
        assert!((mixed.samples[2] + 0.2).abs() < 1e-15);

        let identity = mix_background(&clip, &noise, 0.0).unwrap();
        assert_eq!(identity.samples, clip.samples);
    }

    #[test]
    fn mixing_rejects_mismatches() {
        let clip = clip_of(vec![0.0; 10]);
        let short = clip_of(vec![0.0; 5]);
        assert!(mix_background(&clip, &short, 0.5).is_err());
        let other_rate = AudioClip::new(vec![0.0; 10], 8000).unwrap();
        assert!(mix_background(&clip, &other_rate, 0.5).is_err());
        assert!(mix_background(&clip, &clip, -0.1).is_err());
    }

    #[test]
    fn clip_constructor_rejects_non_finite() {
        assert!(AudioClip::new(vec![0.0, f64::NAN], 16_000).is_err());
        assert!(AudioClip::new(vec![0.0], 0).is_err());
        assert!(AccelTrace::new(vec![[0.0, f64::INFINITY, 0.0]], 100).is_err());
    }
}
