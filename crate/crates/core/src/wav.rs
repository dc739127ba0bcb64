//! 16-bit PCM mono RIFF/WAVE encoding.

use std::path::Path;

use crate::{Error, Result};

/// Convert one sample: scale by 32767, round half away from zero.
#[inline]
pub fn to_pcm16(x: f64) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

pub fn encode(samples: &[f64], sample_rate: u32) -> Vec<u8> {
    let data_len = (samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // PCM
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&sample_rate.to_le_bytes());
    out.extend_from_slice(&(sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &x in samples {
        out.extend_from_slice(&to_pcm16(x).to_le_bytes());
    }
    out
}

/// Decode a 16-bit PCM mono file produced by [`encode`]. Returns samples
/// scaled back to `[-1, 1]` and the sample rate.
pub fn decode(bytes: &[u8]) -> Result<(Vec<f64>, u32)> {
    let bad = |m: &str| Error::format("wav", m);
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(bad("missing RIFF/WAVE header"));
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let u32_at =
        |i: usize| u32::from_le_bytes([bytes[i], bytes[i + 1], bytes[i + 2], bytes[i + 3]]);
    let mut pos = 12;
    let mut rate = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let len = u32_at(pos + 4) as usize;
        let body = pos + 8;
        if body + len > bytes.len() {
            return Err(bad("truncated chunk"));
        }
        match id {
            b"fmt " => {
                if len < 16 || u16_at(body) != 1 || u16_at(body + 2) != 1 || u16_at(body + 14) != 16
                {
                    return Err(bad("only 16-bit PCM mono is supported"));
                }
                rate = Some(u32_at(body + 4));
            }
            b"data" => {
                let rate = rate.ok_or_else(|| bad("data before fmt"))?;
                let samples = bytes[body..body + len]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32767.0)
                    .collect();
                return Ok((samples, rate));
            }
            _ => {}
        }
        pos = body + len + (len & 1);
    }
    Err(bad("no data chunk"))
}

pub fn write(path: &Path, samples: &[f64], sample_rate: u32) -> Result<()> {
    std::fs::write(path, encode(samples, sample_rate)).map_err(|e| Error::io(path, e))
}

pub fn read(path: &Path) -> Result<(Vec<f64>, u32)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
