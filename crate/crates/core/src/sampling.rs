//! Shared sub-pixel sampling and deterministic reduction helpers.

/// Bilinear sample of an interleaved `channels`-wide raster at `(x, y)`.
///
/// Returns `None` when the point lies outside `[0, w-1] x [0, h-1]`.
pub(crate) fn bilinear<const C: usize>(
    data: &[[f32; C]],
    width: usize,
    height: usize,
    x: f64,
    y: f64,
) -> Option<[f64; C]> {
    if !(x >= 0.0 && y >= 0.0 && x <= (width - 1) as f64 && y <= (height - 1) as f64) {
        return None;
    }
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let mut out = [0.0; C];
    for (xi, yi, w) in [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x1, y0, fx * (1.0 - fy)),
        (x0, y1, (1.0 - fx) * fy),
        (x1, y1, fx * fy),
    ] {
        if w == 0.0 {
            continue;
        }
        let px = &data[yi * width + xi];
        for c in 0..C {
            out[c] += w * px[c] as f64;
        }
    }
    Some(out)
}

/// Pairwise summation; fixed split order, so results do not depend on
/// how callers schedule the work.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}
