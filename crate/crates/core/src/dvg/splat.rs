//! Bilinear forward splatting with an optional nearest-depth resolve.

use crate::error::Result;
use crate::imaging::{
    ensure_same_dims, DepthMap, DisparityMap, FlowField, Frame, OcclusionMask, Raster,
};

/// Destinations whose accumulated weight falls below this are holes.
pub const HOLE_WEIGHT_THRESHOLD: f64 = 1e-4;

/// Relative inverse-depth band that counts as the same surface when
/// several sources land on one destination.
pub const FOLD_OVER_TOLERANCE: f64 = 0.05;

/// A per-pixel displacement, reference position to destination position.
pub trait ShiftField: Raster {
    fn shift_at(&self, index: usize) -> [f32; 2];
}

impl ShiftField for FlowField {
    fn shift_at(&self, index: usize) -> [f32; 2] {
        self.data()[index]
    }
}

impl ShiftField for DisparityMap {
    fn shift_at(&self, index: usize) -> [f32; 2] {
        [self.data()[index], 0.0]
    }
}

/// Output of a splat: the rendered frame, its hole mask and the raw
/// accumulated weight per destination pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct SplatResult {
    pub frame: Frame,
    pub mask: OcclusionMask,
    pub weights: Vec<f64>,
}

/// Visits the (up to four) in-bounds integer neighbours of a destination
/// point with their non-zero bilinear weights.
fn footprint(x: f64, y: f64, width: usize, height: usize, mut visit: impl FnMut(usize, f64)) {
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    for (dx, dy, w) in [
        (0.0, 0.0, (1.0 - fx) * (1.0 - fy)),
        (1.0, 0.0, fx * (1.0 - fy)),
        (0.0, 1.0, (1.0 - fx) * fy),
        (1.0, 1.0, fx * fy),
    ] {
        if w <= 0.0 {
            continue;
        }
        let (tx, ty) = (x0 + dx, y0 + dy);
        if tx < 0.0 || ty < 0.0 || tx >= width as f64 || ty >= height as f64 {
            continue;
        }
        visit(ty as usize * width + tx as usize, w);
    }
}

fn destination(index: usize, width: usize, shift: [f32; 2]) -> (f64, f64) {
    let x = (index % width) as f64 + shift[0] as f64;
    let y = (index / width) as f64 + shift[1] as f64;
    (x, y)
}

/// Splats a `C`-channel raster. Returns the per-destination weighted sums and
/// total weights. With `depth`, only sources within [`FOLD_OVER_TOLERANCE`]
/// of the nearest contributing inverse depth are accumulated.
pub fn splat_raster<const C: usize>(
    width: usize,
    height: usize,
    values: &[[f32; C]],
    shift: &dyn Fn(usize) -> [f32; 2],
    depth: Option<&[f32]>,
) -> (Vec<[f64; C]>, Vec<f64>) {
    let n = width * height;
    let mut sums = vec![[0.0f64; C]; n];
    let mut weights = vec![0.0f64; n];

    let nearest = depth.map(|depth| {
        let mut nearest = vec![f64::NEG_INFINITY; n];
        for src in 0..n {
            let (x, y) = destination(src, width, shift(src));
            let d = depth[src] as f64;
            footprint(x, y, width, height, |dst, _| {
                if d > nearest[dst] {
                    nearest[dst] = d;
                }
            });
        }
        nearest
    });

    for src in 0..n {
        let (x, y) = destination(src, width, shift(src));
        let value = &values[src];
        footprint(x, y, width, height, |dst, w| {
            if let (Some(depth), Some(nearest)) = (depth, nearest.as_ref()) {
                if (depth[src] as f64) < nearest[dst] * (1.0 - FOLD_OVER_TOLERANCE) {
                    return;
                }
            }
            for c in 0..C {
                sums[dst][c] += w * value[c] as f64;
            }
            weights[dst] += w;
        });
    }
    (sums, weights)
}

fn frame_pixels(frame: &Frame) -> Vec<[f32; 3]> {
    frame
        .data()
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect()
}

fn normalize(width: usize, height: usize, sums: &[[f64; 3]], weights: Vec<f64>) -> Result<SplatResult> {
    let mut data = Vec::with_capacity(sums.len() * 3);
    let mut holes = Vec::with_capacity(sums.len());
    for (sum, &w) in sums.iter().zip(&weights) {
        if w < HOLE_WEIGHT_THRESHOLD {
            data.extend_from_slice(&[0.0; 3]);
            holes.push(1);
        } else {
            data.extend(sum.iter().map(|s| ((s / w) as f32).clamp(0.0, 1.0)));
            holes.push(0);
        }
    }
    Ok(SplatResult {
        frame: Frame::new(width, height, data)?,
        mask: OcclusionMask::new(width, height, holes)?,
        weights,
    })
}

/// Scatters every source pixel onto the four integer neighbours of its
/// destination with bilinear weights. Out-of-bounds contributions are dropped.
pub fn forward_splat<S: ShiftField>(frame: &Frame, shift: &S) -> Result<SplatResult> {
    ensure_same_dims(frame, shift, "forward_splat")?;
    let (w, h) = frame.dims();
    let (sums, weights) = splat_raster(w, h, &frame_pixels(frame), &|i| shift.shift_at(i), None);
    normalize(w, h, &sums, weights)
}

/// Forward splat where fold-overs are resolved in favour of the nearest
/// surface (largest inverse depth).
pub fn zbuffer_resolve<S: ShiftField>(
    frame: &Frame,
    shift: &S,
    depth: &DepthMap,
) -> Result<SplatResult> {
    ensure_same_dims(frame, shift, "zbuffer_resolve")?;
    ensure_same_dims(frame, depth, "zbuffer_resolve depth")?;
    let (w, h) = frame.dims();
    let (sums, weights) = splat_raster(
        w,
        h,
        &frame_pixels(frame),
        &|i| shift.shift_at(i),
        Some(depth.data()),
    );
    normalize(w, h, &sums, weights)
}

/// Renders a target-view frame back to the reference view by splatting with
/// the negated reference-to-target shift.
pub fn backward_render<S: ShiftField>(frame_at_target: &Frame, shift: &S) -> Result<SplatResult> {
    ensure_same_dims(frame_at_target, shift, "backward_render")?;
    let (w, h) = frame_at_target.dims();
    let (sums, weights) = splat_raster(
        w,
        h,
        &frame_pixels(frame_at_target),
        &|i| {
            let [u, v] = shift.shift_at(i);
            [-u, -v]
        },
        None,
    );
    normalize(w, h, &sums, weights)
}

/// [`backward_render`] with a nearest-depth resolve, given the inverse depth
/// seen from the target view.
pub fn backward_render_resolved<S: ShiftField>(
    frame_at_target: &Frame,
    shift: &S,
    depth_at_target: &DepthMap,
) -> Result<SplatResult> {
    ensure_same_dims(frame_at_target, shift, "backward_render")?;
    ensure_same_dims(frame_at_target, depth_at_target, "backward_render depth")?;
    let (w, h) = frame_at_target.dims();
    let (sums, weights) = splat_raster(
        w,
        h,
        &frame_pixels(frame_at_target),
        &|i| {
            let [u, v] = shift.shift_at(i);
            [-u, -v]
        },
        Some(depth_at_target.data()),
    );
    normalize(w, h, &sums, weights)
}
