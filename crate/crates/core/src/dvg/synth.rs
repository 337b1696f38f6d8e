//! Synthetic two-layer scenes with exact depth and flow.
//!
//! A static textured background plane sits behind a textured rectangle that
//! translates at constant velocity. A pixel belongs to the rectangle when
//! `x0 + vx*t <= x < x0 + vx*t + w` (likewise for `y`), so subpixel
//! velocities move the silhouette in whole-pixel jumps.

use crate::error::{Error, Result};
use crate::imaging::{DepthMap, FlowField, Frame, VideoClip};

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SceneSpec {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    /// Inverse depth of the background plane.
    pub background_depth: f32,
    /// Inverse depth of the rectangle; should exceed the background's.
    pub foreground_depth: f32,
    /// Top-left corner at `t = 0` and size: `[x, y, w, h]`.
    pub rect: [f32; 4],
    /// Rectangle displacement per frame in pixels.
    pub velocity: [f32; 2],
    /// Phase offset for the procedural textures.
    pub texture_phase: f32,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 48,
            height: 32,
            frames: 8,
            background_depth: 0.5,
            foreground_depth: 1.0,
            rect: [12.0, 8.0, 14.0, 12.0],
            velocity: [2.0, 0.0],
            texture_phase: 0.0,
        }
    }
}

/// A generated clip with per-frame depth, forward flows (`t -> t+1`) and
/// backward flows (`t+1 -> t`).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub clip: VideoClip,
    pub depths: Vec<DepthMap>,
    pub flows_fwd: Vec<FlowField>,
    pub flows_bwd: Vec<FlowField>,
}

impl SceneSpec {
    fn origin(&self, t: usize) -> (f32, f32) {
        (
            self.rect[0] + self.velocity[0] * t as f32,
            self.rect[1] + self.velocity[1] * t as f32,
        )
    }

    /// Whether pixel `(x, y)` shows the rectangle in frame `t`.
    pub fn is_foreground(&self, x: usize, y: usize, t: usize) -> bool {
        let (ox, oy) = self.origin(t);
        let (x, y) = (x as f32, y as f32);
        x >= ox && x < ox + self.rect[2] && y >= oy && y < oy + self.rect[3]
    }

    fn background_color(&self, x: f32, y: f32) -> [f32; 3] {
        let p = self.texture_phase;
        [
            0.5 + 0.25 * (0.31 * x + 0.17 * y + p).sin(),
            0.5 + 0.25 * (0.23 * x - 0.29 * y + 1.3 + p).cos(),
            0.5 + 0.2 * (0.11 * x + 0.37 * y + 2.1 * p).sin(),
        ]
    }

    fn foreground_color(&self, lx: f32, ly: f32) -> [f32; 3] {
        let p = self.texture_phase;
        [
            0.45 + 0.3 * (0.9 * lx + p).sin() * (0.7 * ly).cos(),
            0.35 + 0.15 * (0.5 * lx - 0.8 * ly).cos(),
            0.6 + 0.2 * (0.6 * ly + 0.4 * lx + p).sin(),
        ]
    }

    fn validate(&self) -> Result<()> {
        let all_finite = self
            .rect
            .iter()
            .chain(&self.velocity)
            .chain([&self.background_depth, &self.foreground_depth, &self.texture_phase])
            .all(|v| v.is_finite());
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return Err(Error::InvalidDimensions("scene size".into()));
        }
        if !all_finite || self.background_depth < 0.0 || self.foreground_depth < 0.0 {
            return Err(Error::InvalidParameter("scene parameters".into()));
        }
        Ok(())
    }
}

pub fn synth_scene(spec: &SceneSpec) -> Result<SynthScene> {
    spec.validate()?;
    let (w, h) = (spec.width, spec.height);
    let mut frames = Vec::with_capacity(spec.frames);
    let mut depths = Vec::with_capacity(spec.frames);
    for t in 0..spec.frames {
        let (ox, oy) = spec.origin(t);
        frames.push(Frame::from_fn(w, h, |x, y| {
            if spec.is_foreground(x, y, t) {
                spec.foreground_color(x as f32 - ox, y as f32 - oy)
            } else {
                spec.background_color(x as f32, y as f32)
            }
        })?);
        let depth = (0..w * h)
            .map(|i| {
                if spec.is_foreground(i % w, i / w, t) {
                    spec.foreground_depth
                } else {
                    spec.background_depth
                }
            })
            .collect();
        depths.push(DepthMap::new(w, h, depth)?);
    }

    let moving = |t: usize, v: [f32; 2]| -> Result<FlowField> {
        let data = (0..w * h)
            .map(|i| if spec.is_foreground(i % w, i / w, t) { v } else { [0.0, 0.0] })
            .collect();
        FlowField::new(w, h, data)
    };
    let [vx, vy] = spec.velocity;
    let mut flows_fwd = Vec::new();
    let mut flows_bwd = Vec::new();
    for t in 0..spec.frames.saturating_sub(1) {
        flows_fwd.push(moving(t, [vx, vy])?);
        flows_bwd.push(moving(t + 1, [-vx, -vy])?);
    }
    Ok(SynthScene {
        clip: VideoClip::new(frames)?,
        depths,
        flows_fwd,
        flows_bwd,
    })
}
