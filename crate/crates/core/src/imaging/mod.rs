//! Raster value types and the on-disk codecs.
//!
//! Every raster is row-major with a top-left origin. Flow and disparity use
//! `+u` rightward and `+v` downward. Depth is stored as relative inverse depth,
//! so larger values are nearer to the camera.

mod flo;
mod pfm;
mod png;

pub use self::flo::{read_flo, write_flo, FLO_MAGIC};
pub use self::pfm::{read_pfm, write_pfm};
pub use self::png::{read_png_frame, read_png_mask, write_png_frame, write_png_mask};

use crate::error::{Error, Result};

fn check_dims(width: usize, height: usize) -> Result<usize> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidDimensions(format!("{width}x{height}")));
    }
    width
        .checked_mul(height)
        .ok_or(Error::DimensionOverflow)
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch(format!(
            "expected {expected} samples, got {got}"
        )));
    }
    Ok(())
}

/// Implemented by every raster so helpers can compare sizes generically.
pub trait Raster {
    fn width(&self) -> usize;
    fn height(&self) -> usize;

    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn same_dims<R: Raster + ?Sized>(&self, other: &R) -> bool {
        self.dims() == other.dims()
    }
}

macro_rules! raster_impl {
    ($ty:ty) => {
        impl Raster for $ty {
            fn width(&self) -> usize {
                self.width
            }
            fn height(&self) -> usize {
                self.height
            }
        }
    };
}

pub(crate) fn ensure_same_dims<A: Raster + ?Sized, B: Raster + ?Sized>(
    a: &A,
    b: &B,
    what: &str,
) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(format!(
            "{what}: {}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

/// An RGB image with intensities in `[0, 1]`, interleaved row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<f32>,
}
raster_impl!(Frame);

impl Frame {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n * Self::CHANNELS, data.len())?;
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!("intensity {v}")));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Result<Self> {
        let n = check_dims(width, height)?;
        let data = (0..n).flat_map(|_| rgb).collect();
        Self::new(width, height, data)
    }

    /// Builds a frame from a per-pixel function of `(x, y)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f32; 3],
    ) -> Result<Self> {
        let n = check_dims(width, height)?;
        let mut data = Vec::with_capacity(n * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Per-channel mean over all pixels.
    pub fn channel_means(&self) -> [f64; 3] {
        let mut sums = [0.0f64; 3];
        for px in self.data.chunks_exact(3) {
            for c in 0..3 {
                sums[c] += px[c] as f64;
            }
        }
        let n = (self.width * self.height) as f64;
        sums.map(|s| s / n)
    }
}

/// A non-empty sequence of equally sized frames.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoClip {
    frames: Vec<Frame>,
}

impl VideoClip {
    pub fn new(frames: Vec<Frame>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Empty("video clip has no frames".into()))?;
        for (i, f) in frames.iter().enumerate().skip(1) {
            ensure_same_dims(first, f, "clip frame").map_err(|e| Error::at_frame(i, e))?;
        }
        Ok(Self { frames })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<Frame> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn width(&self) -> usize {
        self.frames[0].width
    }

    pub fn height(&self) -> usize {
        self.frames[0].height
    }
}

/// Relative inverse depth; `0` is infinitely far, larger is nearer.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}
raster_impl!(DepthMap);

impl DepthMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n, data.len())?;
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if v < 0.0 {
                return Err(Error::OutOfRange(format!("negative inverse depth {v}")));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        let n = check_dims(width, height)?;
        Self::new(width, height, vec![value; n])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(0.0, f32::max)
    }
}

/// Signed horizontal pixel shift, reference view to target view.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}
raster_impl!(DisparityMap);

impl DisparityMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n, data.len())?;
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if v.abs() > width as f32 {
                return Err(Error::OutOfRange(format!(
                    "disparity {v} exceeds width {width}"
                )));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn negated(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| -v).collect(),
        }
    }

    /// The same shift expressed as a flow field with zero vertical component.
    pub fn to_flow(&self) -> FlowField {
        FlowField {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&d| [d, 0.0]).collect(),
        }
    }
}

/// Per-pixel `(u, v)` displacement in pixels.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    data: Vec<[f32; 2]>,
}
raster_impl!(FlowField);

impl FlowField {
    /// Finite sentinel displacement for pixels with no valid correspondence.
    /// Any endpoint built from it falls outside every raster.
    pub const OUT_OF_VIEW: f32 = 1.0e7;

    pub fn new(width: usize, height: usize, data: Vec<[f32; 2]>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n, data.len())?;
        if data.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, [0.0, 0.0])
    }

    pub fn constant(width: usize, height: usize, uv: [f32; 2]) -> Result<Self> {
        let n = check_dims(width, height)?;
        Self::new(width, height, vec![uv; n])
    }

    pub fn data(&self) -> &[[f32; 2]] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> [f32; 2] {
        self.data[y * self.width + x]
    }

    pub fn negated(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|[u, v]| [-u, -v]).collect(),
        }
    }
}

/// Binary hole indicator, `1` = occluded.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct OcclusionMask {
    width: usize,
    height: usize,
    data: Vec<u8>,
}
raster_impl!(OcclusionMask);

impl OcclusionMask {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n, data.len())?;
        if data.iter().any(|&v| v > 1) {
            return Err(Error::NonBinaryMask);
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        let n = check_dims(width, height)?;
        Ok(Self {
            width,
            height,
            data: vec![0; n],
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Result<Self> {
        let n = check_dims(width, height)?;
        let mut data = Vec::with_capacity(n);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x] == 1
    }

    /// Number of occluded pixels.
    pub fn area(&self) -> usize {
        self.data.iter().map(|&v| v as usize).sum()
    }

    pub fn union(&self, other: &Self) -> Result<Self> {
        ensure_same_dims(self, other, "mask union")?;
        Ok(self.zip_with(other, |a, b| a | b))
    }

    pub fn intersection(&self, other: &Self) -> Result<Self> {
        ensure_same_dims(self, other, "mask intersection")?;
        Ok(self.zip_with(other, |a, b| a & b))
    }

    /// True when every occluded pixel of `other` is also occluded here.
    pub fn contains(&self, other: &Self) -> bool {
        self.same_dims(other) && self.data.iter().zip(&other.data).all(|(&a, &b)| a >= b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(u8, u8) -> u8) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }
}

/// Flow confidence in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMap {
    width: usize,
    height: usize,
    data: Vec<f32>,
}
raster_impl!(ConfidenceMap);

impl ConfidenceMap {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        let n = check_dims(width, height)?;
        check_len(n, data.len())?;
        for &v in &data {
            if !v.is_finite() {
                return Err(Error::NonFinite);
            }
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange(format!("confidence {v}")));
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Result<Self> {
        let n = check_dims(width, height)?;
        Self::new(width, height, vec![value; n])
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Pointwise minimum of two maps.
    pub fn min(&self, other: &Self) -> Result<Self> {
        ensure_same_dims(self, other, "confidence min")?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a.min(*b)).collect(),
        })
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }
}
