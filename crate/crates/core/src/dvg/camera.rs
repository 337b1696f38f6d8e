//! Pinhole reprojection between two posed cameras.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::imaging::{DepthMap, FlowField, Raster};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Camera-to-world pose with its intrinsics.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraPose {
    intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl CameraPose {
    pub fn new(intrinsics: Intrinsics, rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite() && cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidParameter(format!("intrinsics {intrinsics:?}")));
        }
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let err = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if err > 1e-6 || (rotation.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidParameter("rotation is not orthonormal".into()));
        }
        Ok(Self {
            intrinsics,
            rotation,
            translation,
        })
    }

    pub fn identity(intrinsics: Intrinsics) -> Result<Self> {
        Self::new(intrinsics, Matrix3::identity(), Vector3::zeros())
    }

    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }
}

/// Per-pixel flow from the `src` view to the `dst` view.
///
/// Metric depth is recovered as `z = 1 / (depth_scale * D + depth_shift)`.
/// Pixels with no valid depth, or that land behind the destination camera,
/// get [`FlowField::OUT_OF_VIEW`].
pub fn reprojection_flow(
    depth: &DepthMap,
    src: &CameraPose,
    dst: &CameraPose,
    depth_scale: f64,
    depth_shift: f64,
) -> Result<FlowField> {
    let (w, h) = depth.dims();
    let ks = src.intrinsics;
    let kd = dst.intrinsics;
    // src camera -> world -> dst camera
    let rot = dst.rotation.transpose() * src.rotation;
    let trans = dst.rotation.transpose() * (src.translation - dst.translation);
    let mut data = Vec::with_capacity(w * h);
    let mut valid = 0usize;
    for y in 0..h {
        for x in 0..w {
            let denom = depth_scale * depth.get(x, y) as f64 + depth_shift;
            let z = 1.0 / denom;
            if !(z.is_finite() && z > 0.0) {
                data.push([FlowField::OUT_OF_VIEW; 2]);
                continue;
            }
            let p = Vector3::new((x as f64 - ks.cx) / ks.fx * z, (y as f64 - ks.cy) / ks.fy * z, z);
            let q = rot * p + trans;
            if !(q.z > 0.0) {
                data.push([FlowField::OUT_OF_VIEW; 2]);
                continue;
            }
            let u = kd.fx * q.x / q.z + kd.cx - x as f64;
            let v = kd.fy * q.y / q.z + kd.cy - y as f64;
            let flow = [u as f32, v as f32];
            if flow.iter().all(|c| c.is_finite() && c.abs() < FlowField::OUT_OF_VIEW) {
                valid += 1;
                data.push(flow);
            } else {
                data.push([FlowField::OUT_OF_VIEW; 2]);
            }
        }
    }
    if valid == 0 {
        return Err(Error::BehindCamera);
    }
    FlowField::new(w, h, data)
}
