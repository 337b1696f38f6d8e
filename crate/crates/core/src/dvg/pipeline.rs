//! End-to-end paired-view generation for a clip.

use rayon::prelude::*;

use super::confidence::{fb_confidence, FbParams};
use super::fill::hole_fill;
use super::refine::{refine_mask, TemporalNeighbor};
use super::splat::{splat_raster, HOLE_WEIGHT_THRESHOLD};
use super::{depth_to_disparity_normalized, StereoShift};
use crate::error::{Error, Result};
use crate::imaging::{
    ensure_same_dims, ConfidenceMap, DepthMap, FlowField, Frame, OcclusionMask, Raster, VideoClip,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    /// Apply temporal mask refinement.
    pub refine: bool,
    pub fb: FbParams,
    /// Fill target-view holes; when off they stay black.
    pub hole_fill: bool,
}

impl Default for GenerateOptions {
    fn default() -> Self {
        Self {
            refine: true,
            fb: FbParams::default(),
            hole_fill: true,
        }
    }
}

/// One training pair sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DvgSample {
    /// Ground truth reference view.
    pub gt_reference: VideoClip,
    /// Hole-filled target view.
    pub target_view: VideoClip,
    /// Reference view with masked pixels zeroed.
    pub masked_reference: VideoClip,
    /// Occlusion masks at the reference view.
    pub masks: Vec<OcclusionMask>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct FrameDiagnostics {
    pub target_hole_area: usize,
    pub unrefined_mask_area: usize,
    pub refined_mask_area: usize,
    /// Mean of the confidence map used for refinement, if any.
    pub confidence_mean: Option<f64>,
    /// The whole target frame was a hole and got the clip-mean colour.
    pub used_fallback: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub sample: DvgSample,
    /// Target view rendered back to the reference view; black where masked.
    pub back_rendered: VideoClip,
    pub unrefined_masks: Vec<OcclusionMask>,
    pub target_holes: Vec<OcclusionMask>,
    pub diagnostics: Vec<FrameDiagnostics>,
}

struct FrameOutput {
    target: Frame,
    back_rendered: Frame,
    target_holes: OcclusionMask,
    mask: OcclusionMask,
    used_fallback: bool,
}

/// Generates a paired sample using a horizontal disparity derived from
/// depth. Disparity is normalized by the clip-wide maximum inverse depth.
pub fn generate_sample(
    clip: &VideoClip,
    depths: &[DepthMap],
    flows_fwd: &[FlowField],
    flows_bwd: &[FlowField],
    shift: StereoShift,
    options: &GenerateOptions,
) -> Result<Generated> {
    let max = depths.iter().map(DepthMap::max).fold(0.0, f32::max);
    let view_flows = depths
        .iter()
        .enumerate()
        .map(|(t, d)| {
            depth_to_disparity_normalized(d, shift, max)
                .map(|d| d.to_flow())
                .map_err(|e| Error::at_frame(t, e))
        })
        .collect::<Result<Vec<_>>>()?;
    generate_sample_with_view_flows(clip, depths, &view_flows, flows_fwd, flows_bwd, options)
}

/// Generates a paired sample from arbitrary per-frame reference-to-target
/// flows, e.g. from [`super::reprojection_flow`].
pub fn generate_sample_with_view_flows(
    clip: &VideoClip,
    depths: &[DepthMap],
    view_flows: &[FlowField],
    flows_fwd: &[FlowField],
    flows_bwd: &[FlowField],
    options: &GenerateOptions,
) -> Result<Generated> {
    validate_inputs(clip, depths, view_flows, flows_fwd, flows_bwd)?;
    options.fb.validate()?;
    let frames = clip.frames();
    let n = frames.len();

    // fallback colour for fully occluded frames: running clip mean
    let mut fallbacks = Vec::with_capacity(n);
    let mut acc = [0.0f64; 3];
    for (t, f) in frames.iter().enumerate() {
        let m = f.channel_means();
        for c in 0..3 {
            acc[c] += m[c];
        }
        fallbacks.push(acc.map(|s| (s / (t + 1) as f64) as f32));
    }

    let per_frame = (0..n)
        .into_par_iter()
        .map(|t| {
            render_frame(&frames[t], &depths[t], &view_flows[t], fallbacks[t], options)
                .map_err(|e| Error::at_frame(t, e))
        })
        .collect::<Result<Vec<FrameOutput>>>()?;

    let unrefined: Vec<OcclusionMask> = per_frame.iter().map(|o| o.mask.clone()).collect();
    let refined: Vec<(OcclusionMask, Option<f64>)> = if options.refine {
        (0..n)
            .into_par_iter()
            .map(|t| refine_frame(t, &unrefined, flows_fwd, flows_bwd, options.fb).map_err(|e| Error::at_frame(t, e)))
            .collect::<Result<_>>()?
    } else {
        unrefined.iter().map(|m| (m.clone(), None)).collect()
    };

    let masked = frames
        .iter()
        .zip(&refined)
        .map(|(f, (m, _))| apply_mask(f, m))
        .collect::<Result<Vec<_>>>()?;

    let diagnostics = per_frame
        .iter()
        .zip(&refined)
        .map(|(o, (m, conf))| FrameDiagnostics {
            target_hole_area: o.target_holes.area(),
            unrefined_mask_area: o.mask.area(),
            refined_mask_area: m.area(),
            confidence_mean: *conf,
            used_fallback: o.used_fallback,
        })
        .collect();
    let target_holes = per_frame.iter().map(|o| o.target_holes.clone()).collect();
    let mut target = Vec::with_capacity(n);
    let mut back = Vec::with_capacity(n);
    for o in per_frame {
        target.push(o.target);
        back.push(o.back_rendered);
    }

    Ok(Generated {
        sample: DvgSample {
            gt_reference: clip.clone(),
            target_view: VideoClip::new(target)?,
            masked_reference: VideoClip::new(masked)?,
            masks: refined.into_iter().map(|(m, _)| m).collect(),
        },
        back_rendered: VideoClip::new(back)?,
        unrefined_masks: unrefined,
        target_holes,
        diagnostics,
    })
}

fn validate_inputs(
    clip: &VideoClip,
    depths: &[DepthMap],
    view_flows: &[FlowField],
    flows_fwd: &[FlowField],
    flows_bwd: &[FlowField],
) -> Result<()> {
    let n = clip.len();
    if depths.len() != n || view_flows.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} frames but {} depth maps and {} view flows",
            depths.len(),
            view_flows.len()
        )));
    }
    if flows_fwd.len() != n - 1 || flows_bwd.len() != n - 1 {
        return Err(Error::DimensionMismatch(format!(
            "{n} frames need {} flow pairs, got {} forward and {} backward",
            n - 1,
            flows_fwd.len(),
            flows_bwd.len()
        )));
    }
    let first = &clip.frames()[0];
    for t in 0..n {
        ensure_same_dims(first, &depths[t], "depth").map_err(|e| Error::at_frame(t, e))?;
        ensure_same_dims(first, &view_flows[t], "view flow").map_err(|e| Error::at_frame(t, e))?;
        if t + 1 < n {
            ensure_same_dims(first, &flows_fwd[t], "forward flow").map_err(|e| Error::at_frame(t, e))?;
            ensure_same_dims(first, &flows_bwd[t], "backward flow").map_err(|e| Error::at_frame(t, e))?;
        }
    }
    Ok(())
}

fn render_frame(
    frame: &Frame,
    depth: &DepthMap,
    view_flow: &FlowField,
    fallback: [f32; 3],
    options: &GenerateOptions,
) -> Result<FrameOutput> {
    let (w, h) = frame.dims();
    // colour, inverse depth and the view shift travel together to the target
    let values: Vec<[f32; 6]> = frame
        .data()
        .chunks_exact(3)
        .zip(depth.data())
        .zip(view_flow.data())
        .map(|((c, &d), &[u, v])| [c[0], c[1], c[2], d, u, v])
        .collect();
    let (sums, weights) = splat_raster(w, h, &values, &|i| view_flow.data()[i], Some(depth.data()));

    let mut rgb = Vec::with_capacity(w * h * 3);
    let mut geometry: Vec<Option<[f32; 3]>> = Vec::with_capacity(w * h);
    let mut holes = Vec::with_capacity(w * h);
    for (s, &wt) in sums.iter().zip(&weights) {
        if wt < HOLE_WEIGHT_THRESHOLD {
            rgb.extend_from_slice(&[0.0; 3]);
            geometry.push(None);
            holes.push(1);
        } else {
            rgb.extend(s[..3].iter().map(|v| ((v / wt) as f32).clamp(0.0, 1.0)));
            geometry.push(Some([(s[3] / wt) as f32, (s[4] / wt) as f32, (s[5] / wt) as f32]));
            holes.push(0);
        }
    }
    let raw = Frame::new(w, h, rgb)?;
    let target_holes = OcclusionMask::new(w, h, holes)?;
    let (target, used_fallback) = if options.hole_fill {
        let filled = hole_fill(&raw, &target_holes, Some(fallback))?;
        (filled.frame, filled.used_fallback)
    } else {
        (raw, false)
    };

    let geometry = fill_background(w, h, &geometry);
    let target_depth: Vec<f32> = geometry.iter().map(|g| g[0].max(0.0)).collect();
    let back_values: Vec<[f32; 3]> = target
        .data()
        .chunks_exact(3)
        .map(|p| [p[0], p[1], p[2]])
        .collect();
    let (back_sums, back_weights) = splat_raster(
        w,
        h,
        &back_values,
        &|i| [-geometry[i][1], -geometry[i][2]],
        Some(&target_depth),
    );
    let mut back_rgb = Vec::with_capacity(w * h * 3);
    let mut mask = Vec::with_capacity(w * h);
    for (s, &wt) in back_sums.iter().zip(&back_weights) {
        if wt < HOLE_WEIGHT_THRESHOLD {
            back_rgb.extend_from_slice(&[0.0; 3]);
            mask.push(1);
        } else {
            back_rgb.extend(s.iter().map(|v| ((v / wt) as f32).clamp(0.0, 1.0)));
            mask.push(0);
        }
    }
    Ok(FrameOutput {
        target,
        back_rendered: Frame::new(w, h, back_rgb)?,
        mask: OcclusionMask::new(w, h, mask)?,
        target_holes,
        used_fallback,
    })
}

/// Fills target-view geometry holes from the farther (smaller inverse
/// depth) of the nearest known pixels to the left and right; disocclusions
/// expose background. Falls back to the column, then to zeros.
fn fill_background(w: usize, h: usize, geometry: &[Option<[f32; 3]>]) -> Vec<[f32; 3]> {
    let farther = |a: Option<[f32; 3]>, b: Option<[f32; 3]>| match (a, b) {
        (Some(a), Some(b)) => Some(if b[0] < a[0] { b } else { a }),
        (a, b) => a.or(b),
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            if let Some(g) = geometry[y * w + x] {
                out.push(g);
                continue;
            }
            let left = (0..x).rev().find_map(|xi| geometry[y * w + xi]);
            let right = (x + 1..w).find_map(|xi| geometry[y * w + xi]);
            let row = farther(left, right);
            let value = row.or_else(|| {
                let up = (0..y).rev().find_map(|yi| geometry[yi * w + x]);
                let down = (y + 1..h).find_map(|yi| geometry[yi * w + x]);
                farther(up, down)
            });
            out.push(value.unwrap_or([0.0; 3]));
        }
    }
    out
}

fn refine_frame(
    t: usize,
    masks: &[OcclusionMask],
    flows_fwd: &[FlowField],
    flows_bwd: &[FlowField],
    fb: FbParams,
) -> Result<(OcclusionMask, Option<f64>)> {
    let n = masks.len();
    let mut conf: Option<ConfidenceMap> = None;
    let mut merge = |c: ConfidenceMap| -> Result<()> {
        conf = Some(match conf.take() {
            Some(prev) => prev.min(&c)?,
            None => c,
        });
        Ok(())
    };
    let prev = if t > 0 {
        merge(fb_confidence(&flows_bwd[t - 1], &flows_fwd[t - 1], fb)?)?;
        Some(TemporalNeighbor {
            mask: &masks[t - 1],
            flow: &flows_bwd[t - 1],
        })
    } else {
        None
    };
    let next = if t + 1 < n {
        merge(fb_confidence(&flows_fwd[t], &flows_bwd[t], fb)?)?;
        Some(TemporalNeighbor {
            mask: &masks[t + 1],
            flow: &flows_fwd[t],
        })
    } else {
        None
    };
    match conf {
        None => Ok((masks[t].clone(), None)),
        Some(c) => {
            let mean = c.mean();
            Ok((refine_mask(&masks[t], prev, next, &c)?, Some(mean)))
        }
    }
}

fn apply_mask(frame: &Frame, mask: &OcclusionMask) -> Result<Frame> {
    let data = frame
        .data()
        .chunks_exact(3)
        .zip(mask.data())
        .flat_map(|(px, &m)| if m == 1 { [0.0; 3] } else { [px[0], px[1], px[2]] })
        .collect();
    Frame::new(frame.width(), frame.height(), data)
}
