//! Temporal occlusion-mask refinement.
//!
//! `m'(p) = 1` when `sum_k m_k(p + f_k(p)) * C(p) >= 1` over the previous and
//! next frames, otherwise `m'(p) = m(p)`. Neighbour masks are sampled at the
//! nearest pixel. Out-of-bounds samples and missing neighbours contribute 0.

use crate::error::Result;
use crate::imaging::{ensure_same_dims, ConfidenceMap, FlowField, OcclusionMask, Raster};

/// A neighbouring frame's mask with the flow from the current frame to it.
#[derive(Debug, Clone, Copy)]
pub struct TemporalNeighbor<'a> {
    pub mask: &'a OcclusionMask,
    pub flow: &'a FlowField,
}

fn sample_nearest(mask: &OcclusionMask, x: f64, y: f64) -> u8 {
    let (xr, yr) = (x.round(), y.round());
    if xr < 0.0 || yr < 0.0 || xr >= mask.width() as f64 || yr >= mask.height() as f64 {
        return 0;
    }
    mask.get(xr as usize, yr as usize) as u8
}

pub fn refine_mask(
    current: &OcclusionMask,
    prev: Option<TemporalNeighbor<'_>>,
    next: Option<TemporalNeighbor<'_>>,
    confidence: &ConfidenceMap,
) -> Result<OcclusionMask> {
    ensure_same_dims(current, confidence, "refine_mask confidence")?;
    let neighbors: Vec<TemporalNeighbor<'_>> = prev.into_iter().chain(next).collect();
    for n in &neighbors {
        ensure_same_dims(current, n.mask, "refine_mask neighbour mask")?;
        ensure_same_dims(current, n.flow, "refine_mask neighbour flow")?;
    }
    OcclusionMask::from_fn(current.width(), current.height(), |x, y| {
        if current.get(x, y) {
            return true;
        }
        let c = confidence.get(x, y) as f64;
        let sum: f64 = neighbors
            .iter()
            .map(|n| {
                let [u, v] = n.flow.get(x, y);
                sample_nearest(n.mask, x as f64 + u as f64, y as f64 + v as f64) as f64 * c
            })
            .sum();
        sum >= 1.0
    })
}

/// Counts pixels of interior frames whose mask value disagrees with both
/// flow-aligned temporal neighbours. Only pixels whose aligned samples both
/// land inside the raster are considered.
///
/// `to_prev[t]` maps frame `t + 1` to `t`; `to_next[t]` maps frame `t` to `t + 1`.
pub fn flicker_count(masks: &[OcclusionMask], to_prev: &[FlowField], to_next: &[FlowField]) -> usize {
    let mut count = 0;
    for t in 1..masks.len().saturating_sub(1) {
        let m = &masks[t];
        let (w, h) = m.dims();
        for y in 0..h {
            for x in 0..w {
                let sample = |mask: &OcclusionMask, flow: &FlowField| -> Option<bool> {
                    let [u, v] = flow.get(x, y);
                    let xs = (x as f64 + u as f64).round();
                    let ys = (y as f64 + v as f64).round();
                    (xs >= 0.0 && ys >= 0.0 && xs < w as f64 && ys < h as f64)
                        .then(|| mask.get(xs as usize, ys as usize))
                };
                let (Some(p), Some(n)) = (
                    sample(&masks[t - 1], &to_prev[t - 1]),
                    sample(&masks[t + 1], &to_next[t]),
                ) else {
                    continue;
                };
                let here = m.get(x, y);
                if here != p && here != n {
                    count += 1;
                }
            }
        }
    }
    count
}
