//! Deterministic push-pull hole filling.
//!
//! Known pixels are averaged down a 2x pyramid until a level has no gaps;
//! holes then take the value of their parent on the way back up. Every
//! filled value is an average of known values, so it stays inside their
//! per-channel range.

use crate::error::Result;
use crate::imaging::{ensure_same_dims, Frame, OcclusionMask, Raster};

/// Filled frame plus whether the all-occluded fallback was used.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleFill {
    pub frame: Frame,
    pub used_fallback: bool,
}

struct Level {
    width: usize,
    height: usize,
    sums: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Level {
    fn downsample(&self) -> Level {
        let width = self.width.div_ceil(2);
        let height = self.height.div_ceil(2);
        let mut sums = vec![[0.0; 3]; width * height];
        let mut weights = vec![0.0; width * height];
        for y in 0..self.height {
            for x in 0..self.width {
                let src = y * self.width + x;
                let dst = (y / 2) * width + x / 2;
                for c in 0..3 {
                    sums[dst][c] += self.sums[src][c];
                }
                weights[dst] += self.weights[src];
            }
        }
        Level {
            width,
            height,
            sums,
            weights,
        }
    }

    fn fully_known(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }
}

/// Fills masked pixels of `frame`. Pixels outside the mask are returned
/// untouched. When every pixel is masked, `fallback` (or mid-grey) is used.
pub fn hole_fill(frame: &Frame, mask: &OcclusionMask, fallback: Option<[f32; 3]>) -> Result<HoleFill> {
    ensure_same_dims(frame, mask, "hole_fill")?;
    let (w, h) = frame.dims();
    if mask.area() == 0 {
        return Ok(HoleFill {
            frame: frame.clone(),
            used_fallback: false,
        });
    }
    if mask.area() == w * h {
        let rgb = fallback.unwrap_or([0.5; 3]).map(|v| v.clamp(0.0, 1.0));
        return Ok(HoleFill {
            frame: Frame::filled(w, h, rgb)?,
            used_fallback: true,
        });
    }

    let mut base = Level {
        width: w,
        height: h,
        sums: Vec::with_capacity(w * h),
        weights: Vec::with_capacity(w * h),
    };
    for (px, &m) in frame.data().chunks_exact(3).zip(mask.data()) {
        if m == 0 {
            base.sums.push([px[0] as f64, px[1] as f64, px[2] as f64]);
            base.weights.push(1.0);
        } else {
            base.sums.push([0.0; 3]);
            base.weights.push(0.0);
        }
    }

    let mut pyramid = vec![base];
    while !pyramid.last().unwrap().fully_known() {
        let next = pyramid.last().unwrap().downsample();
        pyramid.push(next);
    }

    // pull: resolve colours from the coarsest level downwards
    let top = pyramid.last().unwrap();
    let mut colors: Vec<[f64; 3]> = top
        .sums
        .iter()
        .zip(&top.weights)
        .map(|(s, &wt)| s.map(|v| v / wt))
        .collect();
    let mut parent_width = top.width;
    for level in pyramid.iter().rev().skip(1) {
        let mut here = Vec::with_capacity(level.width * level.height);
        for y in 0..level.height {
            for x in 0..level.width {
                let i = y * level.width + x;
                if level.weights[i] > 0.0 {
                    let wt = level.weights[i];
                    here.push(level.sums[i].map(|v| v / wt));
                } else {
                    here.push(colors[(y / 2) * parent_width + x / 2]);
                }
            }
        }
        colors = here;
        parent_width = level.width;
    }

    let mut data = Vec::with_capacity(w * h * 3);
    for ((px, &m), filled) in frame.data().chunks_exact(3).zip(mask.data()).zip(&colors) {
        if m == 0 {
            data.extend_from_slice(px);
        } else {
            data.extend(filled.iter().map(|&v| v as f32));
        }
    }
    Ok(HoleFill {
        frame: Frame::new(w, h, data)?,
        used_fallback: false,
    })
}
