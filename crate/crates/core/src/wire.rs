//! BLE-notification-style event frame codec.
//!
//! Each event is one 16-byte frame (safely inside the 20-byte BLE 4.0
//! notification payload), little-endian multi-byte fields:
//!
//! ```text
//! offset  size  field
//!      0     1  magic 0xD5
//!      1     1  version 0x01
//!      2     2  device_id
//!      4     2  seq (wraps)
//!      6     4  timestamp_ms
//!     10     1  label (0 = normal, 1 = slam)
//!     11     1  confidence_q8 = round(confidence * 255)
//!     12     2  peak_accel_milli_g (saturating)
//!     14     2  CRC-16/CCITT-FALSE over bytes 0..14
//! ```

use crate::error::{Error, Result};
use crate::model::Label;
use crate::trigger::DetectionEvent;

pub const FRAME_LEN: usize = 16;
pub const MAGIC: u8 = 0xD5;
pub const VERSION: u8 = 0x01;

const CRC_POLY: u16 = 0x1021;

const fn build_crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ CRC_POLY } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

static CRC_TABLE: [u16; 256] = build_crc_table();

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out.
/// Check value: crc16("123456789") == 0x29B1.
pub fn crc16_ccitt_false(data: &[u8]) -> u16 {
    let mut crc = 0xFFFFu16;
    for &byte in data {
        crc = (crc << 8) ^ CRC_TABLE[((crc >> 8) ^ byte as u16) as usize];
    }
    crc
}

/// One reported detection. Confidence and peak acceleration are stored
/// pre-quantized, so encode/decode round-trips exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EventFrame {
    pub device_id: u16,
    pub seq: u16,
    pub timestamp_ms: u32,
    pub label: Label,
    pub confidence_q8: u8,
    pub peak_accel_milli_g: u16,
}

impl EventFrame {
    /// Quantize a detection event for transmission.
    pub fn from_event(device_id: u16, seq: u16, event: &DetectionEvent) -> EventFrame {
        EventFrame {
            device_id,
            seq,
            timestamp_ms: (event.trigger_t_s * 1000.0).round().clamp(0.0, u32::MAX as f64) as u32,
            label: event.label,
            confidence_q8: confidence_to_q8(event.confidence),
            peak_accel_milli_g: peak_g_to_milli(event.peak_accel_g),
        }
    }
}

/// round(confidence * 255), input clamped to [0, 1].
pub fn confidence_to_q8(confidence: f64) -> u8 {
    (confidence.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reconstructed confidence; at most 1/510 from the original.
pub fn q8_to_confidence(q8: u8) -> f64 {
    q8 as f64 / 255.0
}

/// Peak acceleration in milli-g, saturating at the u16 range.
pub fn peak_g_to_milli(peak_g: f64) -> u16 {
    (peak_g.max(0.0) * 1000.0).round().min(u16::MAX as f64) as u16
}

/// Serialize a frame to its 16-byte wire form.
pub fn encode(frame: &EventFrame) -> [u8; FRAME_LEN] {
    let mut bytes = [0u8; FRAME_LEN];
    bytes[0] = MAGIC;
    bytes[1] = VERSION;
    bytes[2..4].copy_from_slice(&frame.device_id.to_le_bytes());
    bytes[4..6].copy_from_slice(&frame.seq.to_le_bytes());
    bytes[6..10].copy_from_slice(&frame.timestamp_ms.to_le_bytes());
    bytes[10] = frame.label.index() as u8;
    bytes[11] = frame.confidence_q8;
    bytes[12..14].copy_from_slice(&frame.peak_accel_milli_g.to_le_bytes());
    let crc = crc16_ccitt_false(&bytes[..14]);
    bytes[14..16].copy_from_slice(&crc.to_le_bytes());
    bytes
}

/// Parse and validate one frame: exact length, magic, version, CRC, and
/// label range, each failure distinguishable by error variant.
pub fn decode(bytes: &[u8]) -> Result<EventFrame> {
    if bytes.len() != FRAME_LEN {
        return Err(Error::FrameLength { got: bytes.len(), expected: FRAME_LEN });
    }
    if bytes[0] != MAGIC {
        return Err(Error::UnsupportedFrame(format!("magic {:#04x}", bytes[0])));
    }
    if bytes[1] != VERSION {
        return Err(Error::UnsupportedFrame(format!("version {:#04x}", bytes[1])));
    }
    let stored = u16::from_le_bytes([bytes[14], bytes[15]]);
    let computed = crc16_ccitt_false(&bytes[..14]);
    if stored != computed {
        return Err(Error::Corruption(format!(
            "crc mismatch: stored {stored:#06x}, computed {computed:#06x}"
        )));
    }
    let label = Label::from_index(bytes[10] as usize)
        .map_err(|_| Error::Corruption(format!("label byte {} out of range", bytes[10])))?;

    Ok(EventFrame {
        device_id: u16::from_le_bytes([bytes[2], bytes[3]]),
        seq: u16::from_le_bytes([bytes[4], bytes[5]]),
        timestamp_ms: u32::from_le_bytes([bytes[6], bytes[7], bytes[8], bytes[9]]),
        label,
        confidence_q8: bytes[11],
        peak_accel_milli_g: u16::from_le_bytes([bytes[12], bytes[13]]),
    })
}

/// Receiver-side counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StreamDiagnostics {
    /// Bytes discarded while hunting for the next valid frame.
    pub skipped_bytes: usize,
}

/// Decode a byte stream of concatenated frames, resynchronizing on the
/// magic byte after any corruption and counting the bytes skipped.
pub fn frame_stream_decode(bytes: &[u8]) -> (Vec<EventFrame>, StreamDiagnostics) {
    let mut frames = Vec::new();
    let mut diagnostics = StreamDiagnostics::default();
    let mut pos = 0;
    while pos < bytes.len() {
        if bytes[pos] == MAGIC && pos + FRAME_LEN <= bytes.len() {
            if let Ok(frame) = decode(&bytes[pos..pos + FRAME_LEN]) {
                frames.push(frame);
                pos += FRAME_LEN;
                continue;
            }
        }
        diagnostics.skipped_bytes += 1;
        pos += 1;
    }
    (frames, diagnostics)
}
