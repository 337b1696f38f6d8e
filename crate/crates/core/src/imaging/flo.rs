//! Middlebury `.flo` optical flow files.

use super::{FlowField, Raster};
use crate::error::{Error, Result};

/// Tag float; reads as "PIEH" in ASCII.
pub const FLO_MAGIC: f32 = 202021.25;

const HEADER_LEN: usize = 12;

pub fn read_flo(bytes: &[u8]) -> Result<FlowField> {
    if bytes.len() < HEADER_LEN {
        if bytes.len() >= 4 && f32::from_le_bytes(bytes[0..4].try_into().unwrap()) != FLO_MAGIC {
            return Err(Error::BadFloMagic);
        }
        return Err(Error::TruncatedPayload);
    }
    let word = |i: usize| -> [u8; 4] { bytes[i..i + 4].try_into().unwrap() };
    if f32::from_le_bytes(word(0)) != FLO_MAGIC {
        return Err(Error::BadFloMagic);
    }
    let width = i32::from_le_bytes(word(4));
    let height = i32::from_le_bytes(word(8));
    if width <= 0 || height <= 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }
    let (width, height) = (width as usize, height as usize);
    let payload_len = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(8))
        .ok_or(Error::DimensionOverflow)?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < payload_len {
        return Err(Error::TruncatedPayload);
    }
    if payload.len() > payload_len {
        return Err(Error::TrailingBytes);
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| {
            [
                f32::from_le_bytes(c[0..4].try_into().unwrap()),
                f32::from_le_bytes(c[4..8].try_into().unwrap()),
            ]
        })
        .collect();
    FlowField::new(width, height, data)
}

pub fn write_flo(flow: &FlowField) -> Vec<u8> {
    let (w, h) = flow.dims();
    let mut out = Vec::with_capacity(HEADER_LEN + w * h * 8);
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(w as i32).to_le_bytes());
    out.extend_from_slice(&(h as i32).to_le_bytes());
    for [u, v] in flow.data() {
        out.extend_from_slice(&u.to_le_bytes());
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
