use crate::error::{Error, Result};
use crate::imaging::{ensure_same_dims, ConfidenceMap, FlowField, Raster};
use crate::sampling::bilinear;

/// Thresholds of the forward-backward consistency test
/// `|f + b|^2 <= alpha * (|f|^2 + |b|^2) + beta`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FbParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for FbParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.5,
        }
    }
}

impl FbParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha >= 0.0 && self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "consistency thresholds alpha={} beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }
}

/// Binary forward-backward flow confidence.
///
/// `flow_fwd` maps frame A to B and `flow_bwd` maps B to A. A pixel is
/// confident (1) when following the forward flow and then the bilinearly
/// sampled backward flow returns close to where it started. Forward
/// endpoints outside the raster get 0.
pub fn fb_confidence(flow_fwd: &FlowField, flow_bwd: &FlowField, params: FbParams) -> Result<ConfidenceMap> {
    ensure_same_dims(flow_fwd, flow_bwd, "fb_confidence")?;
    params.validate()?;
    let (w, h) = flow_fwd.dims();
    let mut data = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let [u, v] = flow_fwd.get(x, y);
            let (u, v) = (u as f64, v as f64);
            let c = match bilinear(flow_bwd.data(), w, h, x as f64 + u, y as f64 + v) {
                None => 0.0,
                Some([bu, bv]) => {
                    let (ru, rv) = (u + bu, v + bv);
                    let residual = ru * ru + rv * rv;
                    let bound = params.alpha * (u * u + v * v + bu * bu + bv * bv) + params.beta;
                    if residual <= bound {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            data.push(c);
        }
    }
    ConfidenceMap::new(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn opposite_constant_flows_are_consistent_in_bounds() {
        let f = FlowField::constant(6, 4, [1.0, -1.0]).unwrap();
        let c = fb_confidence(&f, &f.negated(), FbParams::default()).unwrap();
        for y in 0..4 {
            for x in 0..6 {
                let inside = x + 1 < 6 && y >= 1;
                assert_eq!(c.get(x, y), if inside { 1.0 } else { 0.0 }, "({x},{y})");
            }
        }
    }

    #[test]
    fn large_residual_rejected() {
        // r^2 = 100 > 0.01 * 100 + 0.5
        let fwd = FlowField::constant(32, 1, [10.0, 0.0]).unwrap();
        let bwd = FlowField::zeros(32, 1).unwrap();
        let c = fb_confidence(&fwd, &bwd, FbParams::default()).unwrap();
        assert!(c.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn residual_on_the_bound_is_accepted() {
        // f = (1, 0), b = (-0.5, 0): r^2 = 0.25, bound = 0.01 * 1.25 + 0.24 = 0.2525
        let fwd = FlowField::constant(4, 1, [1.0, 0.0]).unwrap();
        let bwd = FlowField::constant(4, 1, [-0.5, 0.0]).unwrap();
        let c = fb_confidence(&fwd, &bwd, FbParams { alpha: 0.01, beta: 0.24 }).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
        let c = fb_confidence(&fwd, &bwd, FbParams { alpha: 0.0, beta: 0.24 }).unwrap();
        assert_eq!(c.get(0, 0), 0.0);
    }
}
