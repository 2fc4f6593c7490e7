//! Door-slam detection pipeline at desk scale.
//!
//! The crate covers the full path from raw sensor data to a reported event:
//!
//! - [`dsp`] — audio/accelerometer types, framing, FFT, mel filter-bank
//!   energies (MFE), background mixing, and the WAV/CSV/JSON file formats.
//! - [`model`] — a tiny convolutional classifier over MFE spectrograms,
//!   trained locally by mini-batch gradient descent.
//! - [`trigger`] — the deployed-device control loop: acceleration threshold,
//!   six-second capture, relevant-window extraction, classification.
//! - [`synth`] — deterministic synthetic slam / normal-close generator used
//!   in place of real door recordings.
//! - [`eval`] — train/test split, accuracy, confusion matrices, and the
//!   background-noise robustness sweep.
//! - [`wire`] — the 16-byte BLE-notification-style event frame codec.

pub mod dsp;
pub mod error;
pub mod eval;
pub mod model;
pub mod synth;
pub mod trigger;
pub mod wire;

pub use dsp::{AccelFeature, AccelTrace, AudioClip, DspConfig, MelSpectrogram};
pub use error::{Error, Result};
pub use model::{Label, ModelSpec, TrainConfig, TrainedModel, Weights};
pub use synth::{DatasetManifest, NoiseKind, SynthParams};
pub use trigger::{DetectionEvent, TriggerConfig};
pub use wire::EventFrame;
