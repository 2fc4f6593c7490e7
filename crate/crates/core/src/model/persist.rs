//! Model persistence.
//!
//! A trained model is one JSON document bundling the layer list, the input
//! normalization constants, and every parameter tensor:
//!
//! ```text
//! {
//!   "spec":    { "input_h": .., "input_w": .., "layers": [ {"type": ..}, .. ] },
//!   "norm":    { "mean": "<hex float>", "std": "<hex float>" },
//!   "tensors": { "layer0.kernel": { "shape": [..], "values": ["<hex float>", ..] }, .. }
//! }
//! ```
//!
//! Values are written as C99-style hex-float strings so that
//! `load(save(w)) == w` holds bitwise.

use super::{
    expected_param_shapes, spectrogram_tensor, LayerParams, ModelSpec, Normalization, Prediction,
    Tensor, Weights,
};
use crate::dsp::MelSpectrogram;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

/// Format a finite f64 as a canonical hex-float string, e.g.
/// `-0x1.5bf0a8b145769p+1`. Zeros keep their sign; subnormals use a
/// leading `0x0.` with the fixed exponent -1022.
pub fn format_hex_f64(v: f64) -> String {
    if v.is_nan() {
        return "nan".to_string();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf" } else { "-inf" }.to_string();
    }
    let bits = v.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let raw_exp = ((bits >> 52) & 0x7FF) as i64;
    let frac = bits & 0x000F_FFFF_FFFF_FFFF;
    if raw_exp == 0 && frac == 0 {
        format!("{sign}0x0.0000000000000p+0")
    } else if raw_exp == 0 {
        format!("{sign}0x0.{frac:013x}p-1022")
    } else {
        format!("{sign}0x1.{frac:013x}p{:+}", raw_exp - 1023)
    }
}

/// Parse the canonical hex-float form produced by [`format_hex_f64`].
/// Fraction digits may be shorter than 13; anything else is rejected.
pub fn parse_hex_f64(s: &str) -> Result<f64> {
    let bad = || Error::Format { what: "hex float", detail: format!("cannot parse {s:?}") };
    match s {
        "nan" => return Ok(f64::NAN),
        "inf" => return Ok(f64::INFINITY),
        "-inf" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }

    let (negative, rest) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let rest = rest.strip_prefix("0x").ok_or_else(bad)?;

    let (mantissa, exp_str) = rest.split_once('p').ok_or_else(bad)?;
    let exponent: i64 = exp_str.parse().map_err(|_| bad())?;

    let (lead, frac_str) = match mantissa.split_once('.') {
        Some((lead, frac)) => (lead, frac),
        None => (mantissa, ""),
    };
    let leading = match lead {
        "0" => 0u64,
        "1" => 1u64,
        _ => return Err(bad()),
    };
    if frac_str.len() > 13 || !frac_str.chars().all(|c| c.is_ascii_hexdigit()) {
        return Err(bad());
    }
    let mut frac = if frac_str.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_str, 16).map_err(|_| bad())?
    };
    frac <<= 4 * (13 - frac_str.len() as u64);
    frac &= 0x000F_FFFF_FFFF_FFFF;

    let sign_bit = if negative { 1u64 << 63 } else { 0 };
    let bits = if leading == 0 && frac == 0 {
        sign_bit
    } else if leading == 0 {
        if exponent != -1022 {
            return Err(bad());
        }
        sign_bit | frac
    } else {
        let raw_exp = exponent + 1023;
        if !(1..=2046).contains(&raw_exp) {
            return Err(bad());
        }
        sign_bit | ((raw_exp as u64) << 52) | frac
    };
    Ok(f64::from_bits(bits))
}

#[derive(Serialize, Deserialize)]
struct TensorRepr {
    shape: Vec<usize>,
    values: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormRepr {
    mean: String,
    std: String,
}

#[derive(Serialize, Deserialize)]
struct SavedModel {
    spec: ModelSpec,
    norm: NormRepr,
    tensors: BTreeMap<String, TensorRepr>,
}

/// A complete, ready-to-run classifier: topology, input normalization,
/// and learned weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub spec: ModelSpec,
    pub norm: Normalization,
    pub weights: Weights,
}

impl TrainedModel {
    /// Bundle and validate: classifier topology, positive std, and weight
    /// shapes all consistent.
    pub fn new(spec: ModelSpec, norm: Normalization, weights: Weights) -> Result<Self> {
        spec.validate_classifier()?;
        if !(norm.std > 0.0 && norm.std.is_finite() && norm.mean.is_finite()) {
            return Err(Error::invalid("normalization needs finite mean and std > 0"));
        }
        let model = TrainedModel { spec, norm, weights };
        model.weights.matches(&model.spec)?;
        Ok(model)
    }

    /// Normalize a spectrogram and classify it.
    pub fn classify(&self, spectrogram: &MelSpectrogram) -> Result<Prediction> {
        if (spectrogram.n_frames, spectrogram.n_mels) != (self.spec.input_h, self.spec.input_w) {
            return Err(Error::invalid(format!(
                "spectrogram {}x{} does not match model input {}x{}",
                spectrogram.n_frames, spectrogram.n_mels, self.spec.input_h, self.spec.input_w
            )));
        }
        let input = spectrogram_tensor(spectrogram, &self.norm);
        super::predict(&self.spec, &self.weights, &input)
    }

    pub fn to_json(&self) -> String {
        let mut tensors = BTreeMap::new();
        for (i, params) in self.weights.layers.iter().enumerate() {
            if let Some(p) = params {
                tensors.insert(format!("layer{i}.kernel"), tensor_repr(&p.kernel));
                tensors.insert(format!("layer{i}.bias"), tensor_repr(&p.bias));
            }
        }
        let saved = SavedModel {
            spec: self.spec.clone(),
            norm: NormRepr {
                mean: format_hex_f64(self.norm.mean),
                std: format_hex_f64(self.norm.std),
            },
            tensors,
        };
        serde_json::to_string_pretty(&saved).expect("model serializes")
    }

    pub fn from_json(json: &str) -> Result<TrainedModel> {
        let saved: SavedModel = serde_json::from_str(json)?;
        let shapes = saved.spec.layer_shapes()?;

        let mut tensors = saved.tensors;
        let mut layers = Vec::with_capacity(saved.spec.layers.len());
        for (i, layer) in saved.spec.layers.iter().enumerate() {
            match expected_param_shapes(layer, &shapes[i]) {
                None => layers.push(None),
                Some(_) => {
                    let kernel = take_tensor(&mut tensors, &format!("layer{i}.kernel"))?;
                    let bias = take_tensor(&mut tensors, &format!("layer{i}.bias"))?;
                    layers.push(Some(LayerParams { kernel, bias }));
                }
            }
        }
        if let Some(name) = tensors.keys().next() {
            return Err(Error::Format {
                what: "model json",
                detail: format!("unexpected tensor {name:?}"),
            });
        }

        let norm = Normalization {
            mean: parse_hex_f64(&saved.norm.mean)?,
            std: parse_hex_f64(&saved.norm.std)?,
        };
        TrainedModel::new(saved.spec, norm, Weights { layers })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedModel> {
        TrainedModel::from_json(&std::fs::read_to_string(path)?)
    }
}

fn tensor_repr(t: &Tensor) -> TensorRepr {
    TensorRepr {
        shape: t.shape.clone(),
        values: t.values.iter().map(|&v| format_hex_f64(v)).collect(),
    }
}

fn take_tensor(map: &mut BTreeMap<String, TensorRepr>, name: &str) -> Result<Tensor> {
    let repr = map.remove(name).ok_or_else(|| Error::Format {
        what: "model json",
        detail: format!("missing tensor {name:?}"),
    })?;
    let values = repr
        .values
        .iter()
        .map(|s| parse_hex_f64(s))
        .collect::<Result<Vec<f64>>>()?;
    Tensor::new(repr.shape, values)
}
