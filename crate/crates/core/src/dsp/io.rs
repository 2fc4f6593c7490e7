//! On-disk formats: WAV audio, accelerometer CSV, spectrogram export.
//!
//! Audio is WAV, PCM signed 16-bit little-endian, mono. Samples map to
//! [-1, 1) by division by 32768. Accelerometer traces are CSV with the
//! header `t_s,x_g,y_g,z_g`. Spectrograms export as JSON
//! `{n_frames, n_mels, values}` or as a min-max scaled PGM image.

use super::{AccelTrace, AudioClip, MelSpectrogram};
use crate::error::{Error, Result};
use std::io::Write;
use std::path::Path;

const PCM_SCALE: f64 = 32768.0;

/// Write a clip as 16-bit PCM mono WAV. Samples are clamped to [-1, 1]
/// before quantization, so the file always round-trips through
/// [`read_wav`] without error.
pub fn write_wav(path: &Path, clip: &AudioClip) -> Result<()> {
    let n = clip.samples.len() as u32;
    let data_len = n * 2;
    let byte_rate = clip.sample_rate_hz * 2;

    let mut bytes = Vec::with_capacity(44 + data_len as usize);
    bytes.extend_from_slice(b"RIFF");
    bytes.extend_from_slice(&(36 + data_len).to_le_bytes());
    bytes.extend_from_slice(b"WAVE");
    bytes.extend_from_slice(b"fmt ");
    bytes.extend_from_slice(&16u32.to_le_bytes());
    bytes.extend_from_slice(&1u16.to_le_bytes()); // PCM
    bytes.extend_from_slice(&1u16.to_le_bytes()); // mono
    bytes.extend_from_slice(&clip.sample_rate_hz.to_le_bytes());
    bytes.extend_from_slice(&byte_rate.to_le_bytes());
    bytes.extend_from_slice(&2u16.to_le_bytes()); // block align
    bytes.extend_from_slice(&16u16.to_le_bytes()); // bits per sample
    bytes.extend_from_slice(b"data");
    bytes.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        let q = (s.clamp(-1.0, 1.0) * PCM_SCALE).round().clamp(-32768.0, 32767.0) as i16;
        bytes.extend_from_slice(&q.to_le_bytes());
    }

    std::fs::write(path, bytes)?;
    Ok(())
}

/// Read a 16-bit PCM mono WAV file. Any other encoding (float, stereo,
/// other bit depths) is rejected with a format error naming the offender.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path)?;
    let bad = |detail: String| Error::Format { what: "wav", detail };

    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header".into()));
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(bad(format!("chunk {:?} overruns file", String::from_utf8_lossy(id))));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(bad("fmt chunk too short".into()));
                }
                fmt = Some((
                    u16::from_le_bytes(body[0..2].try_into().unwrap()),
                    u16::from_le_bytes(body[2..4].try_into().unwrap()),
                    u32::from_le_bytes(body[4..8].try_into().unwrap()),
                    u16::from_le_bytes(body[14..16].try_into().unwrap()),
                ));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned.
        pos = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or_else(|| bad("no fmt chunk".into()))?;
    if format != 1 {
        return Err(bad(format!("unsupported audio format tag {format}, need PCM (1)")));
    }
    if channels != 1 {
        return Err(bad(format!("unsupported channel count {channels}, need mono")));
    }
    if bits != 16 {
        return Err(bad(format!("unsupported bit depth {bits}, need 16")));
    }
    let data = data.ok_or_else(|| bad("no data chunk".into()))?;
    if data.len() % 2 != 0 {
        return Err(bad("data chunk has odd byte length".into()));
    }

    let samples = data
        .chunks_exact(2)
        .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64 / PCM_SCALE)
        .collect();
    AudioClip::new(samples, rate)
}

/// Write a trace as CSV with header `t_s,x_g,y_g,z_g`, one row per sample,
/// timestamps on the uniform `rate_hz` grid.
pub fn write_accel_csv(path: &Path, trace: &AccelTrace) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["t_s", "x_g", "y_g", "z_g"]).map_err(csv_err)?;
    for (i, s) in trace.samples.iter().enumerate() {
        let t = i as f64 / trace.rate_hz as f64;
        w.write_record([
            t.to_string(),
            s[0].to_string(),
            s[1].to_string(),
            s[2].to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read an accelerometer CSV. Requires the exact header, at least two rows,
/// and strictly increasing timestamps; the rate is recovered from the first
/// timestamp delta.
pub fn read_accel_csv(path: &Path) -> Result<AccelTrace> {
    let bad = |detail: String| Error::Format { what: "accel csv", detail };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t_s", "x_g", "y_g", "z_g"] {
        return Err(bad(format!("unexpected header {:?}", headers)));
    }

    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        if record.len() != 4 {
            return Err(bad(format!("row {row} has {} fields", record.len())));
        }
        let mut vals = [0.0; 4];
        for (i, field) in record.iter().enumerate() {
            vals[i] = field
                .parse::<f64>()
                .map_err(|e| bad(format!("row {row} field {i}: {e}")))?;
        }
        if let Some(&prev) = times.last() {
            if vals[0] <= prev {
                return Err(bad(format!("timestamps not strictly increasing at row {row}")));
            }
        }
        times.push(vals[0]);
        samples.push([vals[1], vals[2], vals[3]]);
    }
    if samples.len() < 2 {
        return Err(bad("need at least two rows to recover the sample rate".into()));
    }
    let dt = times[1] - times[0];
    let rate = (1.0 / dt).round();
    if !(rate >= 1.0 && rate <= u32::MAX as f64) {
        return Err(bad(format!("implausible sample spacing {dt} s")));
    }
    AccelTrace::new(samples, rate as u32)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format { what: "accel csv", detail: e.to_string() }
}

/// Spectrogram as JSON `{n_frames, n_mels, values}`.
pub fn spectrogram_to_json(spec: &MelSpectrogram) -> String {
    serde_json::to_string(spec).expect("spectrogram serializes")
}

pub fn spectrogram_from_json(json: &str) -> Result<MelSpectrogram> {
    let spec: MelSpectrogram = serde_json::from_str(json)?;
    if spec.values.len() != spec.n_frames * spec.n_mels {
        return Err(Error::Format {
            what: "spectrogram json",
            detail: format!(
                "values length {} does not match {} x {}",
                spec.values.len(),
                spec.n_frames,
                spec.n_mels
            ),
        });
    }
    Ok(spec)
}

/// Render the spectrogram as a binary PGM (P5) image, min-max scaled to
/// 0-255. Time runs left to right, low mel bands at the bottom row.
pub fn spectrogram_to_pgm(spec: &MelSpectrogram) -> Vec<u8> {
    let (lo, hi) = spec
        .values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = hi - lo;

    let mut out = Vec::with_capacity(32 + spec.n_frames * spec.n_mels);
    write!(out, "P5\n{} {}\n255\n", spec.n_frames, spec.n_mels).unwrap();
    for mel in (0..spec.n_mels).rev() {
        for frame in 0..spec.n_frames {
            let v = spec.get(frame, mel);
            let level = if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            };
            out.push(level);
        }
    }
    out
}
