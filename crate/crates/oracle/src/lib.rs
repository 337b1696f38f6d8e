//! Slow, direct reference implementations used to cross-check the
//! optimized library code.
//!
//! Everything here works on plain `f64` slices with explicit dimensions.
//! Rasters are row-major; multi-channel rasters are interleaved. The
//! formulations are deliberately different from the library ones
//! (gather instead of scatter, explicit tent kernels, two-pass moments)
//! so agreement is meaningful.

pub const HOLE_WEIGHT_THRESHOLD: f64 = 1e-4;
pub const FOLD_OVER_TOLERANCE: f64 = 0.05;

fn tent(d: f64) -> f64 {
    (1.0 - d.abs()).max(0.0)
}

/// Result of a gather-style splat.
#[derive(Debug, Clone, PartialEq)]
pub struct Splat {
    /// Weighted colour sums, `w * h * channels`.
    pub sums: Vec<f64>,
    pub weights: Vec<f64>,
    pub holes: Vec<bool>,
    /// Normalized colour clamped to `[0, 1]`; zero at holes.
    pub colour: Vec<f64>,
}

/// For each destination pixel, collects every source whose displaced
/// position lies within one pixel and weights it by the bilinear tent.
/// With `inv_depth`, only sources within the fold-over band of the
/// largest inverse depth reaching that destination are kept.
pub fn splat(
    width: usize,
    height: usize,
    channels: usize,
    values: &[f64],
    shifts: &[[f64; 2]],
    inv_depth: Option<&[f64]>,
) -> Splat {
    let n = width * height;
    let mut out = Splat {
        sums: vec![0.0; n * channels],
        weights: vec![0.0; n],
        holes: vec![true; n],
        colour: vec![0.0; n * channels],
    };
    for ty in 0..height {
        for tx in 0..width {
            let dst = ty * width + tx;
            let mut contributors = Vec::new();
            for sy in 0..height {
                for sx in 0..width {
                    let src = sy * width + sx;
                    let px = sx as f64 + shifts[src][0];
                    let py = sy as f64 + shifts[src][1];
                    let wgt = tent(px - tx as f64) * tent(py - ty as f64);
                    if wgt > 0.0 {
                        contributors.push((src, wgt));
                    }
                }
            }
            if let Some(depth) = inv_depth {
                let nearest = contributors
                    .iter()
                    .map(|&(s, _)| depth[s])
                    .fold(f64::NEG_INFINITY, f64::max);
                contributors.retain(|&(s, _)| depth[s] >= nearest * (1.0 - FOLD_OVER_TOLERANCE));
            }
            for &(src, wgt) in &contributors {
                for c in 0..channels {
                    out.sums[dst * channels + c] += wgt * values[src * channels + c];
                }
                out.weights[dst] += wgt;
            }
            if out.weights[dst] >= HOLE_WEIGHT_THRESHOLD {
                out.holes[dst] = false;
                for c in 0..channels {
                    let v = out.sums[dst * channels + c] / out.weights[dst];
                    out.colour[dst * channels + c] = v.clamp(0.0, 1.0);
                }
            }
        }
    }
    out
}

/// Bilinear sample as an explicit tent-weighted sum over all pixels.
/// `None` outside `[0, w-1] x [0, h-1]`.
pub fn sample_bilinear(
    width: usize,
    height: usize,
    channels: usize,
    data: &[f64],
    x: f64,
    y: f64,
) -> Option<Vec<f64>> {
    if x < 0.0 || y < 0.0 || x > (width - 1) as f64 || y > (height - 1) as f64 {
        return None;
    }
    let mut acc = vec![0.0; channels];
    for qy in 0..height {
        for qx in 0..width {
            let wgt = tent(x - qx as f64) * tent(y - qy as f64);
            if wgt == 0.0 {
                continue;
            }
            for c in 0..channels {
                acc[c] += wgt * data[(qy * width + qx) * channels + c];
            }
        }
    }
    Some(acc)
}

fn flat(v: &[[f64; 2]]) -> Vec<f64> {
    v.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Binary forward-backward consistency.
pub fn fb_confidence(
    width: usize,
    height: usize,
    fwd: &[[f64; 2]],
    bwd: &[[f64; 2]],
    alpha: f64,
    beta: f64,
) -> Vec<f64> {
    let bwd_flat = flat(bwd);
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let f = fwd[y * width + x];
            let Some(b) = sample_bilinear(width, height, 2, &bwd_flat, x as f64 + f[0], y as f64 + f[1]) else {
                out.push(0.0);
                continue;
            };
            let r2 = (f[0] + b[0]).powi(2) + (f[1] + b[1]).powi(2);
            let mags = f[0].powi(2) + f[1].powi(2) + b[0].powi(2) + b[1].powi(2);
            out.push(if r2 <= alpha * mags + beta { 1.0 } else { 0.0 });
        }
    }
    out
}

/// Nearest integer, halves away from zero.
fn nearest(v: f64) -> f64 {
    if v < 0.0 {
        -(-v + 0.5).floor()
    } else {
        (v + 0.5).floor()
    }
}

/// A temporal neighbour: its mask and the flow from the current frame.
pub type Neighbor<'a> = (&'a [u8], &'a [[f64; 2]]);

pub fn refine_mask(
    width: usize,
    height: usize,
    current: &[u8],
    neighbors: &[Neighbor<'_>],
    confidence: &[f64],
) -> Vec<u8> {
    let mut out = current.to_vec();
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let mut total = 0.0;
            for (mask, flow) in neighbors {
                let sx = nearest(x as f64 + flow[i][0]);
                let sy = nearest(y as f64 + flow[i][1]);
                let inside = sx >= 0.0 && sy >= 0.0 && sx < width as f64 && sy < height as f64;
                let m = if inside {
                    mask[sy as usize * width + sx as usize] as f64
                } else {
                    0.0
                };
                total += m * confidence[i];
            }
            if total >= 1.0 {
                out[i] = 1;
            }
        }
    }
    out
}

fn matvec_row(token: &[f64], w: &[f64], c: usize) -> Vec<f64> {
    (0..c).map(|j| (0..c).map(|k| token[k] * w[k * c + j]).sum()).collect()
}

/// Single-head scaled dot-product attention, one query token at a time.
pub fn attention(queries: &[Vec<f64>], keys: &[Vec<f64>], wq: &[f64], wk: &[f64], wv: &[f64]) -> Vec<Vec<f64>> {
    let c = queries[0].len();
    let k: Vec<Vec<f64>> = keys.iter().map(|t| matvec_row(t, wk, c)).collect();
    let v: Vec<Vec<f64>> = keys.iter().map(|t| matvec_row(t, wv, c)).collect();
    let mut out = Vec::with_capacity(queries.len());
    for qt in queries {
        let q = matvec_row(qt, wq, c);
        let logits: Vec<f64> = k
            .iter()
            .map(|kj| q.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / (c as f64).sqrt())
            .collect();
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = e.iter().sum();
        let mut row = vec![0.0; c];
        for (ej, vj) in e.iter().zip(&v) {
            for ch in 0..c {
                row[ch] += ej / z * vj[ch];
            }
        }
        out.push(row);
    }
    out
}

/// Full self-attention over `top` stacked on `bottom`, keeping the outputs
/// of the first `top.len()` tokens.
pub fn spatial_concat(top: &[Vec<f64>], bottom: &[Vec<f64>], wq: &[f64], wk: &[f64], wv: &[f64]) -> Vec<Vec<f64>> {
    let stacked: Vec<Vec<f64>> = top.iter().chain(bottom).cloned().collect();
    let mut all = attention(&stacked, &stacked, wq, wk, wv);
    all.truncate(top.len());
    all
}

pub fn psnr(a: &[f64], b: &[f64]) -> f64 {
    let mut se = 0.0;
    for i in 0..a.len() {
        se += (a[i] - b[i]) * (a[i] - b[i]);
    }
    let mse = se / a.len() as f64;
    if mse == 0.0 {
        100.0
    } else {
        (-10.0 * mse.log10()).min(100.0)
    }
}

/// Mean SSIM over valid 11x11 windows of a 3-channel image.
pub fn ssim(width: usize, height: usize, a: &[f64], b: &[f64]) -> Option<f64> {
    const WIN: usize = 11;
    if width < WIN || height < WIN {
        return None;
    }
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut kernel = [[0.0; WIN]; WIN];
    let mut norm = 0.0;
    for (dy, row) in kernel.iter_mut().enumerate() {
        for (dx, k) in row.iter_mut().enumerate() {
            let ry = dy as f64 - 5.0;
            let rx = dx as f64 - 5.0;
            *k = (-(rx * rx + ry * ry) / (2.0 * 1.5 * 1.5)).exp();
            norm += *k;
        }
    }
    let mut channel_means = 0.0;
    for c in 0..3 {
        let mut total = 0.0;
        let mut count = 0usize;
        for y0 in 0..=height - WIN {
            for x0 in 0..=width - WIN {
                let at = |img: &[f64], dx: usize, dy: usize| img[((y0 + dy) * width + x0 + dx) * 3 + c];
                let (mut ma, mut mb) = (0.0, 0.0);
                for dy in 0..WIN {
                    for dx in 0..WIN {
                        let g = kernel[dy][dx] / norm;
                        ma += g * at(a, dx, dy);
                        mb += g * at(b, dx, dy);
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for dy in 0..WIN {
                    for dx in 0..WIN {
                        let g = kernel[dy][dx] / norm;
                        let da = at(a, dx, dy) - ma;
                        let db = at(b, dx, dy) - mb;
                        va += g * da * da;
                        vb += g * db * db;
                        cov += g * da * db;
                    }
                }
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
        channel_means += total / count as f64;
    }
    Some(channel_means / 3.0)
}

/// Confidence-weighted warping error averaged over the pairs with
/// non-zero total confidence. Returns the average and the skipped pairs.
pub fn warp_error(
    width: usize,
    height: usize,
    frames: &[Vec<f64>],
    flows: &[Vec<[f64; 2]>],
    confidence: &[Vec<f64>],
) -> (Option<f64>, Vec<usize>) {
    let mut per_pair = Vec::new();
    let mut skipped = Vec::new();
    for t in 0..frames.len() - 1 {
        let (mut num, mut den) = (0.0, 0.0);
        for y in 0..height {
            for x in 0..width {
                let i = y * width + x;
                let c = confidence[t][i];
                let f = flows[t][i];
                let Some(s) = sample_bilinear(width, height, 3, &frames[t + 1], x as f64 + f[0], y as f64 + f[1])
                else {
                    continue;
                };
                let d2: f64 = (0..3).map(|k| (frames[t][i * 3 + k] - s[k]).powi(2)).sum();
                num += c * d2;
                den += c;
            }
        }
        if den > 0.0 {
            per_pair.push(num / den);
        } else {
            skipped.push(t);
        }
    }
    let value = if per_pair.is_empty() {
        None
    } else {
        Some(per_pair.iter().sum::<f64>() / per_pair.len() as f64)
    };
    (value, skipped)
}
