//! PNG frames and masks.
//!
//! Frames are written as 16-bit RGB; 8- and 16-bit grayscale, gray+alpha,
//! RGB and RGBA are accepted on input (alpha is dropped). Masks are 8-bit
//! grayscale holding only `0` and `255`.

use std::io::Cursor;

use png::{BitDepth, ColorType, Transformations};

use super::{Frame, OcclusionMask, Raster};
use crate::error::{Error, Result};

struct Decoded {
    width: usize,
    height: usize,
    color: ColorType,
    depth: BitDepth,
    bytes: Vec<u8>,
}

impl Decoded {
    fn max_value(&self) -> u16 {
        match self.depth {
            BitDepth::Sixteen => u16::MAX,
            _ => u8::MAX as u16,
        }
    }

    fn samples(&self) -> Vec<u16> {
        match self.depth {
            BitDepth::Sixteen => self
                .bytes
                .chunks_exact(2)
                .map(|b| u16::from_be_bytes([b[0], b[1]]))
                .collect(),
            _ => self.bytes.iter().map(|&b| b as u16).collect(),
        }
    }
}

fn decode(bytes: &[u8]) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(Transformations::IDENTITY);
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::PngDecode(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or(Error::DimensionOverflow)?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::PngDecode(e.to_string()))?;
    match info.bit_depth {
        BitDepth::Eight | BitDepth::Sixteen => {}
        other => return Err(Error::UnsupportedPng(format!("bit depth {other:?}"))),
    }
    if info.color_type == ColorType::Indexed {
        return Err(Error::UnsupportedPng("palette".into()));
    }
    let width = info.width as usize;
    let height = info.height as usize;
    // drop row padding, if any
    let row = width * info.color_type.samples() * if info.bit_depth == BitDepth::Sixteen { 2 } else { 1 };
    let mut packed = Vec::with_capacity(row * height);
    for y in 0..height {
        packed.extend_from_slice(&buf[y * info.line_size..y * info.line_size + row]);
    }
    Ok(Decoded {
        width,
        height,
        color: info.color_type,
        depth: info.bit_depth,
        bytes: packed,
    })
}

pub fn read_png_frame(bytes: &[u8]) -> Result<Frame> {
    let img = decode(bytes)?;
    let max = img.max_value() as f32;
    let samples = img.samples();
    let stride = img.color.samples();
    let mut data = Vec::with_capacity(img.width * img.height * 3);
    for px in samples.chunks_exact(stride) {
        let rgb = match img.color {
            ColorType::Grayscale | ColorType::GrayscaleAlpha => [px[0]; 3],
            _ => [px[0], px[1], px[2]],
        };
        data.extend(rgb.iter().map(|&v| v as f32 / max));
    }
    Frame::new(img.width, img.height, data)
}

pub fn read_png_mask(bytes: &[u8]) -> Result<OcclusionMask> {
    let img = decode(bytes)?;
    if img.color != ColorType::Grayscale {
        return Err(Error::UnsupportedPng(format!(
            "mask must be single-channel, got {:?}",
            img.color
        )));
    }
    let max = img.max_value();
    let data = img
        .samples()
        .into_iter()
        .map(|v| match v {
            0 => Ok(0),
            v if v == max => Ok(1),
            _ => Err(Error::NonBinaryMask),
        })
        .collect::<Result<Vec<u8>>>()?;
    OcclusionMask::new(img.width, img.height, data)
}

fn encode(width: usize, height: usize, color: ColorType, depth: BitDepth, data: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc
            .write_header()
            .map_err(|e| Error::PngEncode(e.to_string()))?;
        writer
            .write_image_data(data)
            .map_err(|e| Error::PngEncode(e.to_string()))?;
        writer.finish().map_err(|e| Error::PngEncode(e.to_string()))?;
    }
    Ok(out)
}

/// Quantizes to 16 bits per channel. Frames decoded from 16-bit PNGs
/// survive a write/read cycle bit-exactly.
pub fn write_png_frame(frame: &Frame) -> Result<Vec<u8>> {
    let mut bytes = Vec::with_capacity(frame.data().len() * 2);
    for &v in frame.data() {
        let q = (v * u16::MAX as f32).round() as u16;
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    encode(frame.width(), frame.height(), ColorType::Rgb, BitDepth::Sixteen, &bytes)
}

pub fn write_png_mask(mask: &OcclusionMask) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = mask.data().iter().map(|&m| m * u8::MAX).collect();
    encode(mask.width(), mask.height(), ColorType::Grayscale, BitDepth::Eight, &bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eight_bit_rgba_input_drops_alpha() {
        let raw = [255u8, 0, 51, 7];
        let b = encode(1, 1, ColorType::Rgba, BitDepth::Eight, &raw).unwrap();
        let f = read_png_frame(&b).unwrap();
        assert_eq!(f.pixel(0, 0), [1.0, 0.0, 0.2]);
    }

    #[test]
    fn gray_expands_to_rgb() {
        let b = encode(2, 1, ColorType::Grayscale, BitDepth::Eight, &[0, 255]).unwrap();
        let f = read_png_frame(&b).unwrap();
        assert_eq!(f.data(), &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn palette_and_low_depth_rejected() {
        let b = encode(8, 1, ColorType::Grayscale, BitDepth::One, &[0b1010_1010]).unwrap();
        assert!(matches!(read_png_frame(&b), Err(Error::UnsupportedPng(_))));
    }

    #[test]
    fn sixteen_bit_masks_accepted() {
        let raw = [0u8, 0, 255, 255];
        let b = encode(2, 1, ColorType::Grayscale, BitDepth::Sixteen, &raw).unwrap();
        assert_eq!(read_png_mask(&b).unwrap().data(), &[0, 1]);
    }

    #[test]
    fn rgb_mask_rejected_but_readable_as_frame() {
        let b = encode(1, 1, ColorType::Rgb, BitDepth::Eight, &[255, 255, 255]).unwrap();
        assert!(matches!(read_png_mask(&b), Err(Error::UnsupportedPng(_))));
        assert!(read_png_frame(&b).is_ok());
    }
}
