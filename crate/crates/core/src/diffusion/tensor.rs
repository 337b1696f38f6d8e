use crate::error::{Error, Result};

/// A `(frames, channels, height, width)` block of latent features.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    shape: [usize; 4],
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::InvalidDimensions(format!("tensor shape {shape:?}")));
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or(Error::DimensionOverflow)?;
        if data.len() != len {
            return Err(Error::DimensionMismatch(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { shape, data })
    }

    pub fn filled(shape: [usize; 4], value: f64) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, vec![value; len])
    }

    pub fn from_fn(shape: [usize; 4], f: impl FnMut(usize) -> f64) -> Result<Self> {
        let len = shape.iter().product();
        Self::new(shape, (0..len).map(f).collect())
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn frames(&self) -> usize {
        self.shape[0]
    }

    /// Elements per frame: `channels * height * width`.
    pub fn frame_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn frame(&self, n: usize) -> &[f64] {
        let m = self.frame_len();
        &self.data[n * m..(n + 1) * m]
    }

    pub(crate) fn ensure_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::DimensionMismatch(format!(
                "{what}: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub(crate) fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other, "elementwise")?;
        Self::new(
            self.shape,
            self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    /// Raw little-endian serialization: four `u32` dims, then `f32` values.
    /// Values are narrowed to `f32`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        for d in self.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::BadTensorHeader);
        }
        let mut shape = [0usize; 4];
        for (i, d) in shape.iter_mut().enumerate() {
            *d = u32::from_le_bytes(bytes[i * 4..i * 4 + 4].try_into().unwrap()) as usize;
        }
        if shape.contains(&0) {
            return Err(Error::BadTensorHeader);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .ok_or(Error::DimensionOverflow)?;
        let payload = &bytes[16..];
        if payload.len() < len {
            return Err(Error::TruncatedPayload);
        }
        if payload.len() > len {
            return Err(Error::TrailingBytes);
        }
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        Self::new(shape, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_layout() {
        let t = LatentTensor::new([1, 1, 1, 2], vec![1.0, -0.5]).unwrap();
        let b = t.to_bytes();
        assert_eq!(b.len(), 16 + 8);
        assert_eq!(&b[12..16], &2u32.to_le_bytes());
        assert_eq!(&b[16..20], &1.0f32.to_le_bytes());
        assert_eq!(LatentTensor::from_bytes(&b).unwrap(), t);
        assert_eq!(LatentTensor::from_bytes(&b[..10]), Err(Error::BadTensorHeader));
        assert_eq!(LatentTensor::from_bytes(&b[..20]), Err(Error::TruncatedPayload));
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LatentTensor::new([1, 0, 1, 1], vec![]).is_err());
        assert!(LatentTensor::new([1, 1, 1, 2], vec![0.0]).is_err());
        assert_eq!(LatentTensor::new([1, 1, 1, 1], vec![f64::NAN]), Err(Error::NonFinite));
    }
}
