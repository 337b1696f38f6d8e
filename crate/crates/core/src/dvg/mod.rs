//! Depth-based video generation.
//!
//! A reference clip is forward-rendered into a second viewpoint, its holes
//! are filled, and the result is rendered back. Whatever the round trip
//! cannot cover becomes the occlusion mask `M`. Masks are then refined
//! temporally using optical flow between neighbouring reference frames.

mod camera;
mod confidence;
mod fill;
mod pipeline;
mod refine;
mod splat;
mod synth;

pub use self::camera::{reprojection_flow, CameraPose, Intrinsics};
pub use self::confidence::{fb_confidence, FbParams};
pub use self::fill::{hole_fill, HoleFill};
pub use self::pipeline::{
    generate_sample, generate_sample_with_view_flows, DvgSample, FrameDiagnostics, GenerateOptions,
    Generated,
};
pub use self::refine::{flicker_count, refine_mask, TemporalNeighbor};
pub use self::splat::{
    backward_render, backward_render_resolved, forward_splat, splat_raster, zbuffer_resolve,
    ShiftField, SplatResult, HOLE_WEIGHT_THRESHOLD, FOLD_OVER_TOLERANCE,
};
pub use self::synth::{synth_scene, SceneSpec, SynthScene};

use crate::error::{Error, Result};
use crate::imaging::{DepthMap, DisparityMap, Raster};

/// Which side of the reference camera the target view sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Left,
    Right,
}

impl Direction {
    pub fn sign(self) -> f32 {
        match self {
            Direction::Left => -1.0,
            Direction::Right => 1.0,
        }
    }
}

/// Maximum disparity (at the nearest depth) and its direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StereoShift {
    gain: f32,
    direction: Direction,
}

impl StereoShift {
    pub fn new(gain: f32, direction: Direction) -> Result<Self> {
        if !gain.is_finite() || gain < 0.0 {
            return Err(Error::InvalidParameter(format!("stereo gain {gain}")));
        }
        Ok(Self { gain, direction })
    }

    pub fn gain(&self) -> f32 {
        self.gain
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// Gains of a quarter of the frame width or more fold the image over itself.
    pub fn check_width(&self, width: usize) -> Result<()> {
        if self.gain >= width as f32 / 4.0 {
            return Err(Error::InvalidParameter(format!(
                "stereo gain {} must be below width/4 = {}",
                self.gain,
                width as f32 / 4.0
            )));
        }
        Ok(())
    }
}

/// `d = direction * gain * D / max(D)`, normalized by the map's own maximum.
pub fn depth_to_disparity(depth: &DepthMap, shift: StereoShift) -> Result<DisparityMap> {
    depth_to_disparity_normalized(depth, shift, depth.max())
}

/// Like [`depth_to_disparity`] but with an explicit normalizer, e.g. the
/// maximum over a whole clip so disparity does not pump between frames.
pub fn depth_to_disparity_normalized(
    depth: &DepthMap,
    shift: StereoShift,
    max_inverse_depth: f32,
) -> Result<DisparityMap> {
    shift.check_width(depth.width())?;
    if !max_inverse_depth.is_finite() || max_inverse_depth < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "normalizer {max_inverse_depth}"
        )));
    }
    let scale = shift.direction.sign() * shift.gain;
    let data = depth
        .data()
        .iter()
        .map(|&d| {
            if max_inverse_depth > 0.0 {
                scale * (d / max_inverse_depth)
            } else {
                0.0
            }
        })
        .collect();
    DisparityMap::new(depth.width(), depth.height(), data)
}
