//! Single-head dot-product attention over small dense feature maps, the
//! blended temporal attention used to augment reference features, and the
//! concat-along-height spatial attention.

use crate::error::{Error, Result};

/// Default self-attention weight in [`til_augment`].
pub const DEFAULT_LAMBDA_BLEND: f64 = 0.6;
/// Default number of neighbouring frames fed to [`til_augment`].
pub const DEFAULT_NEIGHBORS: usize = 8;

/// An `(h, w, c)` feature map stored as `h * w` row-major tokens of `c` channels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl FeatureMap {
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::InvalidDimensions(format!("{height}x{width}x{channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::DimensionMismatch(format!(
                "{height}x{width}x{channels} needs {} values, got {}",
                height * width * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    /// A flat token matrix, viewed as a single-row map.
    pub fn from_tokens(tokens: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(1, tokens, channels, data)
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn tokens(&self) -> usize {
        self.height * self.width
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Stacks `self` above `below` along the height axis.
    pub fn concat_height(&self, below: &Self) -> Result<Self> {
        if self.shape() != below.shape() {
            return Err(Error::DimensionMismatch(format!(
                "concat {:?} with {:?}",
                self.shape(),
                below.shape()
            )));
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&below.data);
        Self::new(self.height * 2, self.width, self.channels, data)
    }
}

/// Query, key and value projections, each `c x c` row-major. Tokens are
/// row vectors: `Q = Z * Wq`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    channels: usize,
    wq: Vec<f64>,
    wk: Vec<f64>,
    wv: Vec<f64>,
}

impl AttentionWeights {
    pub fn new(channels: usize, wq: Vec<f64>, wk: Vec<f64>, wv: Vec<f64>) -> Result<Self> {
        if channels == 0 {
            return Err(Error::InvalidDimensions("zero channels".into()));
        }
        for m in [&wq, &wk, &wv] {
            if m.len() != channels * channels {
                return Err(Error::DimensionMismatch(format!(
                    "projection must be {channels}x{channels}"
                )));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
        }
        Ok(Self { channels, wq, wk, wv })
    }

    pub fn identity(channels: usize) -> Result<Self> {
        let eye: Vec<f64> = (0..channels * channels)
            .map(|i| if i / channels == i % channels { 1.0 } else { 0.0 })
            .collect();
        Self::new(channels, eye.clone(), eye.clone(), eye)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn query(&self) -> &[f64] {
        &self.wq
    }

    pub fn key(&self) -> &[f64] {
        &self.wk
    }

    pub fn value(&self) -> &[f64] {
        &self.wv
    }
}

fn project(map: &FeatureMap, w: &[f64]) -> Vec<f64> {
    let c = map.channels;
    let mut out = vec![0.0; map.tokens() * c];
    for t in 0..map.tokens() {
        let row = map.token(t);
        for j in 0..c {
            let mut acc = 0.0;
            for k in 0..c {
                acc += row[k] * w[k * c + j];
            }
            out[t * c + j] = acc;
        }
    }
    out
}

fn check_channels(a: &FeatureMap, b: &FeatureMap, w: &AttentionWeights) -> Result<()> {
    if a.channels != b.channels || a.channels != w.channels {
        return Err(Error::DimensionMismatch(format!(
            "channel counts {} / {} / weights {}",
            a.channels, b.channels, w.channels
        )));
    }
    Ok(())
}

struct Projected {
    q: Vec<f64>,
    k: Vec<f64>,
    v: Vec<f64>,
}

fn softmax_row(q: &[f64], k: &[f64], c: usize, keys: usize) -> Vec<f64> {
    let scale = 1.0 / (c as f64).sqrt();
    let logits: Vec<f64> = (0..keys)
        .map(|j| {
            let kj = &k[j * c..(j + 1) * c];
            q.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale
        })
        .collect();
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn prepare(z_a: &FeatureMap, z_b: &FeatureMap, w: &AttentionWeights) -> Result<Projected> {
    check_channels(z_a, z_b, w)?;
    Ok(Projected {
        q: project(z_a, &w.wq),
        k: project(z_b, &w.wk),
        v: project(z_b, &w.wv),
    })
}

/// Row-stochastic attention matrix, `tokens(z_a) x tokens(z_b)`.
pub fn attention_weights(z_a: &FeatureMap, z_b: &FeatureMap, w: &AttentionWeights) -> Result<Vec<Vec<f64>>> {
    let p = prepare(z_a, z_b, w)?;
    let c = z_a.channels;
    Ok((0..z_a.tokens())
        .map(|i| softmax_row(&p.q[i * c..(i + 1) * c], &p.k, c, z_b.tokens()))
        .collect())
}

/// `softmax(Q K^T / sqrt(c)) V` with queries from `z_a` and keys/values from
/// `z_b`. The output has `z_a`'s shape.
pub fn attn(z_a: &FeatureMap, z_b: &FeatureMap, w: &AttentionWeights) -> Result<FeatureMap> {
    let p = prepare(z_a, z_b, w)?;
    let c = z_a.channels;
    let mut out = Vec::with_capacity(z_a.data.len());
    for i in 0..z_a.tokens() {
        let probs = softmax_row(&p.q[i * c..(i + 1) * c], &p.k, c, z_b.tokens());
        for ch in 0..c {
            let mut acc = 0.0;
            for (j, pj) in probs.iter().enumerate() {
                acc += pj * p.v[j * c + ch];
            }
            out.push(acc);
        }
    }
    FeatureMap::new(z_a.height, z_a.width, c, out)
}

/// `lambda * attn(z_r, z_r) + (1 - lambda) * mean_i attn(z_r, z_i)`.
///
/// The neighbour mean is summed per element in sorted order, so the result
/// does not depend on the order of `neighbors`; identical neighbour outputs
/// average to themselves exactly.
pub fn til_augment(
    z_r: &FeatureMap,
    neighbors: &[FeatureMap],
    lambda_blend: f64,
    w: &AttentionWeights,
) -> Result<FeatureMap> {
    if neighbors.is_empty() {
        return Err(Error::Empty("temporal neighbours".into()));
    }
    if !(0.0..=1.0).contains(&lambda_blend) {
        return Err(Error::InvalidParameter(format!("lambda_blend {lambda_blend}")));
    }
    for n in neighbors {
        if n.shape() != z_r.shape() {
            return Err(Error::DimensionMismatch(format!(
                "neighbour {:?} vs reference {:?}",
                n.shape(),
                z_r.shape()
            )));
        }
    }
    let own = attn(z_r, z_r, w)?;
    let cross = neighbors
        .iter()
        .map(|n| attn(z_r, n, w))
        .collect::<Result<Vec<_>>>()?;
    let count = neighbors.len() as f64;
    let mut column = Vec::with_capacity(neighbors.len());
    let data = (0..own.data.len())
        .map(|e| {
            column.clear();
            column.extend(cross.iter().map(|m| m.data[e]));
            column.sort_by(f64::total_cmp);
            let mean = if column[0] == column[column.len() - 1] {
                column[0]
            } else {
                column.iter().sum::<f64>() / count
            };
            lambda_blend * own.data[e] + (1.0 - lambda_blend) * mean
        })
        .collect();
    FeatureMap::new(z_r.height, z_r.width, z_r.channels, data)
}

/// Stacks `z_t` above `z_aug` along height, self-attends over all `2hw`
/// tokens, and keeps the top `h` rows.
pub fn spatial_concat_attention(z_t: &FeatureMap, z_aug: &FeatureMap, w: &AttentionWeights) -> Result<FeatureMap> {
    let stacked = z_t.concat_height(z_aug)?;
    // the top half of the self-attention output is exactly the rows whose
    // queries come from z_t
    let p = prepare(&stacked, &stacked, w)?;
    let c = z_t.channels;
    let mut out = Vec::with_capacity(z_t.data.len());
    for i in 0..z_t.tokens() {
        let probs = softmax_row(&p.q[i * c..(i + 1) * c], &p.k, c, stacked.tokens());
        for ch in 0..c {
            let mut acc = 0.0;
            for (j, pj) in probs.iter().enumerate() {
                acc += pj * p.v[j * c + ch];
            }
            out.push(acc);
        }
    }
    FeatureMap::new(z_t.height, z_t.width, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(h: usize, w: usize, c: usize, f: impl Fn(usize) -> f64) -> FeatureMap {
        FeatureMap::new(h, w, c, (0..h * w * c).map(f).collect()).unwrap()
    }

    #[test]
    fn single_key_returns_its_value() {
        let a = map(2, 2, 3, |i| i as f64 * 0.3 - 1.0);
        let b = map(1, 1, 3, |i| [0.2, -0.4, 0.9][i]);
        let w = AttentionWeights::identity(3).unwrap();
        let out = attn(&a, &b, &w).unwrap();
        for t in 0..4 {
            assert_eq!(out.token(t), b.token(0));
        }
    }

    #[test]
    fn hand_softmax_quarter_three_quarters() {
        let a = FeatureMap::from_tokens(1, 1, vec![1.0]).unwrap();
        let b = FeatureMap::from_tokens(2, 1, vec![0.0, 3f64.ln()]).unwrap();
        let w = AttentionWeights::identity(1).unwrap();
        let p = attention_weights(&a, &b, &w).unwrap();
        assert!((p[0][0] - 0.25).abs() < 1e-15 && (p[0][1] - 0.75).abs() < 1e-15);
        let out = attn(&a, &b, &w).unwrap();
        assert!((out.data()[0] - 0.75 * 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn lambda_endpoints() {
        let w = AttentionWeights::identity(2).unwrap();
        let r = map(2, 2, 2, |i| (i as f64).sin());
        let q = map(2, 2, 2, |i| (i as f64 * 0.7).cos());
        assert_eq!(til_augment(&r, &[q.clone()], 1.0, &w).unwrap(), attn(&r, &r, &w).unwrap());
        assert_eq!(
            til_augment(&r, &[q.clone(), q.clone(), q.clone()], 0.0, &w).unwrap(),
            attn(&r, &q, &w).unwrap()
        );
        assert!(til_augment(&r, &[], 0.5, &w).is_err());
        assert!(til_augment(&r, &[q], 1.5, &w).is_err());
    }

    #[test]
    fn spatial_output_keeps_shape() {
        let w = AttentionWeights::identity(3).unwrap();
        let a = map(2, 3, 3, |i| i as f64 * 0.05);
        let b = map(2, 3, 3, |i| 1.0 - i as f64 * 0.05);
        assert_eq!(spatial_concat_attention(&a, &b, &w).unwrap().shape(), a.shape());
        assert!(spatial_concat_attention(&a, &map(3, 2, 3, |_| 0.0), &w).is_err());
    }
}
