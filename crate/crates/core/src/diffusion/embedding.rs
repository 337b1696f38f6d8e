use crate::error::{Error, Result};

/// Frequency base of the sinusoidal embedding.
pub const EMBEDDING_BASE: f64 = 10_000.0;
/// Deviation strengths are mostly in `[0, 1]`; scaling spreads them over
/// the same range timesteps occupy.
pub const EMBEDDING_SCALE: f64 = 1_000.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

/// Sinusoidal embedding of a deviation strength, laid out like a timestep
/// embedding: `[sin(w_0 s'), cos(w_0 s'), sin(w_1 s'), ...]` with
/// `s' = 1000 s` and `w_k = 10000^(-2k/dim)`.
pub fn sds_embedding(strength: f64, dim: usize) -> Result<EmbeddingVector> {
    if dim == 0 || !dim.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("embedding dim {dim} must be even and positive")));
    }
    if !strength.is_finite() {
        return Err(Error::NonFinite);
    }
    if strength < 0.0 {
        return Err(Error::InvalidParameter(format!("negative deviation strength {strength}")));
    }
    let arg = strength * EMBEDDING_SCALE;
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim / 2 {
        let freq = EMBEDDING_BASE.powf(-((2 * k) as f64) / dim as f64);
        out.push((arg * freq).sin());
        out.push((arg * freq).cos());
    }
    Ok(EmbeddingVector(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_strength_alternates() {
        let e = sds_embedding(0.0, 8).unwrap();
        assert_eq!(e.as_slice(), &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn odd_dim_rejected() {
        assert!(sds_embedding(0.1, 7).is_err());
        assert!(sds_embedding(-0.1, 8).is_err());
    }

    #[test]
    fn nearby_strengths_are_distinguishable() {
        let embs: Vec<_> = (0..=1000).map(|i| sds_embedding(i as f64 * 1e-3, 16).unwrap()).collect();
        for pair in embs.windows(2) {
            let linf = pair[0]
                .as_slice()
                .iter()
                .zip(pair[1].as_slice())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(linf > 0.0);
        }
        assert_eq!(sds_embedding(0.42, 16).unwrap(), sds_embedding(0.42, 16).unwrap());
    }
}
