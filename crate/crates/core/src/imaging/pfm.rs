//! Grayscale Portable Float Map (`Pf`).
//!
//! Scanlines are stored bottom-to-top; a negative scale marks little-endian
//! payload. We always write `-1.0`.

use super::{DepthMap, Raster};
use crate::error::{Error, Result};

struct Header {
    width: usize,
    height: usize,
    little_endian: bool,
    payload_start: usize,
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let bad = |m: &str| Error::MalformedPfmHeader(m.to_string());
    let mut pos = 0;
    match next_token(bytes, &mut pos) {
        Some(b"Pf") => {}
        Some(b"PF") => return Err(Error::UnsupportedPfmKind),
        _ => return Err(bad("missing Pf magic")),
    }
    let mut number = |what: &str| -> Result<&str> {
        let tok = next_token(bytes, &mut pos).ok_or_else(|| bad(what))?;
        std::str::from_utf8(tok).map_err(|_| bad(what))
    };
    let width: usize = number("width")?.parse().map_err(|_| bad("width"))?;
    let height: usize = number("height")?.parse().map_err(|_| bad("height"))?;
    let scale: f64 = number("scale")?.parse().map_err(|_| bad("scale"))?;
    if width == 0 || height == 0 {
        return Err(bad("zero dimension"));
    }
    if !scale.is_finite() || scale == 0.0 {
        return Err(bad("scale"));
    }
    // exactly one whitespace byte separates the header from the payload
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(bad("missing header terminator")),
    }
    Ok(Header {
        width,
        height,
        little_endian: scale < 0.0,
        payload_start: pos,
    })
}

pub fn read_pfm(bytes: &[u8]) -> Result<DepthMap> {
    let h = parse_header(bytes)?;
    let count = h
        .width
        .checked_mul(h.height)
        .ok_or(Error::DimensionOverflow)?;
    let payload_len = count.checked_mul(4).ok_or(Error::DimensionOverflow)?;
    let payload = &bytes[h.payload_start..];
    if payload.len() < payload_len {
        return Err(Error::TruncatedPayload);
    }
    if payload.len() > payload_len {
        return Err(Error::TrailingBytes);
    }
    let mut data = vec![0.0f32; count];
    for (file_row, chunk) in payload.chunks_exact(h.width * 4).enumerate() {
        let y = h.height - 1 - file_row;
        for (x, b) in chunk.chunks_exact(4).enumerate() {
            let raw = [b[0], b[1], b[2], b[3]];
            data[y * h.width + x] = if h.little_endian {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    DepthMap::new(h.width, h.height, data)
}

pub fn write_pfm(depth: &DepthMap) -> Vec<u8> {
    let (w, h) = depth.dims();
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for &v in &depth.data()[y * w..(y + 1) * w] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_endian_input_is_accepted() {
        let mut b = b"Pf\n2 1\n1.0\n".to_vec();
        b.extend_from_slice(&1.5f32.to_be_bytes());
        b.extend_from_slice(&0.25f32.to_be_bytes());
        let d = read_pfm(&b).unwrap();
        assert_eq!(d.data(), &[1.5, 0.25]);
    }

    #[test]
    fn rows_are_flipped() {
        let d = DepthMap::new(1, 2, vec![1.0, 2.0]).unwrap();
        let b = write_pfm(&d);
        // bottom row (2.0) first
        assert_eq!(&b[b.len() - 8..b.len() - 4], &2.0f32.to_le_bytes());
        assert_eq!(read_pfm(&b).unwrap(), d);
    }

    #[test]
    fn rejects_bad_payloads() {
        let mut b = b"Pf\n1 1\n-1.0\n".to_vec();
        assert_eq!(read_pfm(&b), Err(Error::TruncatedPayload));
        b.extend_from_slice(&f32::NAN.to_le_bytes());
        assert_eq!(read_pfm(&b), Err(Error::NonFinite));
        let huge = b"Pf\n99999999999 99999999999\n-1.0\n".to_vec();
        assert_eq!(read_pfm(&huge), Err(Error::DimensionOverflow));
        assert!(matches!(read_pfm(b"P5\n1 1\n"), Err(Error::MalformedPfmHeader(_))));
        assert!(matches!(read_pfm(b"Pf\n1 x\n-1.0\n"), Err(Error::MalformedPfmHeader(_))));
    }
}
