//! Image and video quality metrics: PSNR, SSIM and flow-warping error.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, ConfidenceMap, FlowField, Frame, Raster, VideoClip};
use crate::sampling::{bilinear, pairwise_sum};

/// Reported PSNR for identical frames (and the upper bound otherwise).
pub const PSNR_CAP_DB: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

/// Per-frame values of one metric and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub metric: String,
    pub params: BTreeMap<String, f64>,
    pub per_frame: Vec<f64>,
    /// `None` when no frame was evaluated.
    pub mean: Option<f64>,
    /// Frame indices that could not be evaluated.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<usize>,
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, params: BTreeMap<String, f64>, per_frame: Vec<f64>) -> Self {
        let mean = (!per_frame.is_empty()).then(|| per_frame.iter().sum::<f64>() / per_frame.len() as f64);
        Self {
            metric: metric.into(),
            params,
            per_frame,
            mean,
            skipped: Vec::new(),
        }
    }
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    ensure_same_dims(a, b, "mse")?;
    let sq: Vec<f64> = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

/// `10 log10(1 / MSE)` for unit-range frames, capped at [`PSNR_CAP_DB`].
pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    let e = mse(a, b)?;
    if e == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / e).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for gy in &g {
        for gx in &g {
            w.push(gy * gx);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Mean SSIM over every fully contained 11x11 Gaussian window, averaged
/// over the three channels.
pub fn ssim(a: &Frame, b: &Frame) -> Result<f64> {
    ensure_same_dims(a, b, "ssim")?;
    let (w, h) = a.dims();
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::FrameTooSmall);
    }
    let window = gaussian_window();
    let (da, db) = (a.data(), b.data());
    let mut per_channel = [0.0; 3];
    for (c, out) in per_channel.iter_mut().enumerate() {
        let mut local = Vec::with_capacity((w - SSIM_WINDOW + 1) * (h - SSIM_WINDOW + 1));
        for y0 in 0..=h - SSIM_WINDOW {
            for x0 in 0..=w - SSIM_WINDOW {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for wy in 0..SSIM_WINDOW {
                    for wx in 0..SSIM_WINDOW {
                        let g = window[wy * SSIM_WINDOW + wx];
                        let i = ((y0 + wy) * w + x0 + wx) * 3 + c;
                        let (va, vb) = (da[i] as f64, db[i] as f64);
                        ma += g * va;
                        mb += g * vb;
                        aa += g * (va * va);
                        bb += g * (vb * vb);
                        ab += g * (va * vb);
                    }
                }
                let var_a = aa - ma * ma;
                let var_b = bb - mb * mb;
                let cov = ab - ma * mb;
                let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
                let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
                local.push(num / den);
            }
        }
        *out = pairwise_sum(&local) / local.len() as f64;
    }
    Ok(per_channel.iter().sum::<f64>() / 3.0)
}

/// Flow-warping error of a clip.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WarpError {
    /// Mean over evaluated frame pairs; `None` when every pair was skipped.
    pub value: Option<f64>,
    /// Confidence-weighted squared residual per pair `(t, t+1)`.
    pub per_pair: Vec<Option<f64>>,
    /// Pairs with zero total confidence.
    pub skipped: Vec<usize>,
}

/// For each pair, the confidence-weighted mean of `|I_t(p) - I_{t+1}(p + f_t(p))|^2`
/// (squared norm over RGB, bilinear sampling). Endpoints outside the
/// frame carry no weight.
pub fn warp_error(clip: &VideoClip, flows_fwd: &[FlowField], confidence: &[ConfidenceMap]) -> Result<WarpError> {
    let pairs = clip.len() - 1;
    if flows_fwd.len() != pairs || confidence.len() != pairs {
        return Err(Error::DimensionMismatch(format!(
            "{} frames need {pairs} flows and confidence maps, got {} and {}",
            clip.len(),
            flows_fwd.len(),
            confidence.len()
        )));
    }
    let frames = clip.frames();
    let (w, h) = (clip.width(), clip.height());
    let mut per_pair = Vec::with_capacity(pairs);
    let mut skipped = Vec::new();
    for t in 0..pairs {
        ensure_same_dims(&frames[t], &flows_fwd[t], "warp flow").map_err(|e| Error::at_frame(t, e))?;
        ensure_same_dims(&frames[t], &confidence[t], "warp confidence").map_err(|e| Error::at_frame(t, e))?;
        let next: Vec<[f32; 3]> = frames[t + 1]
            .data()
            .chunks_exact(3)
            .map(|p| [p[0], p[1], p[2]])
            .collect();
        let mut weighted = Vec::with_capacity(w * h);
        let mut weights = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let c = confidence[t].get(x, y) as f64;
                if c == 0.0 {
                    continue;
                }
                let [u, v] = flows_fwd[t].get(x, y);
                let Some(warped) = bilinear(&next, w, h, x as f64 + u as f64, y as f64 + v as f64) else {
                    continue;
                };
                let here = frames[t].pixel(x, y);
                let sq: f64 = (0..3)
                    .map(|k| {
                        let d = here[k] as f64 - warped[k];
                        d * d
                    })
                    .sum();
                weighted.push(c * sq);
                weights.push(c);
            }
        }
        let total = pairwise_sum(&weights);
        if total > 0.0 {
            per_pair.push(Some(pairwise_sum(&weighted) / total));
        } else {
            per_pair.push(None);
            skipped.push(t);
        }
    }
    let evaluated: Vec<f64> = per_pair.iter().flatten().copied().collect();
    let value = (!evaluated.is_empty()).then(|| evaluated.iter().sum::<f64>() / evaluated.len() as f64);
    Ok(WarpError {
        value,
        per_pair,
        skipped,
    })
}

fn paired_report(
    name: &str,
    params: BTreeMap<String, f64>,
    a: &VideoClip,
    b: &VideoClip,
    f: impl Fn(&Frame, &Frame) -> Result<f64>,
) -> Result<MetricReport> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!("{} vs {} frames", a.len(), b.len())));
    }
    let values = a
        .frames()
        .iter()
        .zip(b.frames())
        .enumerate()
        .map(|(i, (x, y))| f(x, y).map_err(|e| Error::at_frame(i, e)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport::new(name, params, values))
}

pub fn psnr_report(a: &VideoClip, b: &VideoClip) -> Result<MetricReport> {
    let params = BTreeMap::from([("cap_db".to_string(), PSNR_CAP_DB), ("peak".to_string(), 1.0)]);
    paired_report("psnr", params, a, b, psnr)
}

pub fn ssim_report(a: &VideoClip, b: &VideoClip) -> Result<MetricReport> {
    let params = BTreeMap::from([
        ("window".to_string(), SSIM_WINDOW as f64),
        ("sigma".to_string(), SSIM_SIGMA),
        ("c1".to_string(), SSIM_C1),
        ("c2".to_string(), SSIM_C2),
    ]);
    paired_report("ssim", params, a, b, ssim)
}

pub fn warp_error_report(
    clip: &VideoClip,
    flows_fwd: &[FlowField],
    confidence: &[ConfidenceMap],
    params: BTreeMap<String, f64>,
) -> Result<MetricReport> {
    let e = warp_error(clip, flows_fwd, confidence)?;
    let mut report = MetricReport::new("warp_error", params, e.per_pair.iter().flatten().copied().collect());
    report.skipped = e.skipped;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grad(w: usize, h: usize, off: f32) -> Frame {
        Frame::from_fn(w, h, |x, y| {
            [
                (x as f32 / w as f32 * 0.8 + off).min(1.0),
                (y as f32 / h as f32 * 0.5 + off).min(1.0),
                0.3,
            ]
        })
        .unwrap()
    }

    #[test]
    fn psnr_cap_and_closed_form() {
        let a = Frame::filled(4, 4, [0.5; 3]).unwrap();
        let b = Frame::filled(4, 4, [0.6; 3]).unwrap();
        assert_eq!(psnr(&a, &a).unwrap(), PSNR_CAP_DB);
        // f32 0.6 - 0.5 is not exactly 0.1
        assert!((psnr(&a, &b).unwrap() - 20.0).abs() < 1e-5);
        assert_eq!(psnr(&a, &b).unwrap(), psnr(&b, &a).unwrap());
    }

    #[test]
    fn ssim_identity_and_too_small() {
        let a = grad(16, 12, 0.0);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        let tiny = Frame::filled(4, 4, [0.0; 3]).unwrap();
        assert_eq!(ssim(&tiny, &tiny), Err(Error::FrameTooSmall));
    }

    #[test]
    fn ssim_black_vs_white() {
        let a = Frame::filled(11, 11, [0.0; 3]).unwrap();
        let b = Frame::filled(11, 11, [1.0; 3]).unwrap();
        let expected = SSIM_C1 / (1.0 + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn ssim_symmetric() {
        let a = grad(13, 12, 0.0);
        let b = grad(13, 12, 0.1);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert!(ssim(&a, &b).unwrap() < 1.0);
    }

    #[test]
    fn report_mean() {
        let r = MetricReport::new("x", BTreeMap::new(), vec![1.0, 2.0, 4.0]);
        assert!((r.mean.unwrap() - 7.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn warp_error_static_is_zero_and_skips_unconfident() {
        let f = grad(6, 5, 0.0);
        let clip = VideoClip::new(vec![f.clone(), f.clone(), f]).unwrap();
        let flows = vec![FlowField::zeros(6, 5).unwrap(); 2];
        let conf = vec![ConfidenceMap::filled(6, 5, 1.0).unwrap(), ConfidenceMap::filled(6, 5, 0.0).unwrap()];
        let e = warp_error(&clip, &flows, &conf).unwrap();
        assert_eq!(e.value, Some(0.0));
        assert_eq!(e.skipped, vec![1]);
        assert!(warp_error(&clip, &flows[..1], &conf).is_err());
    }
}
