//! Deviation strength, stereo-aware loss and the combined training loss.

use super::schedule::estimate_clean;
use super::{LatentTensor, NoiseSchedule};
use crate::error::{Error, Result};
use crate::sampling::pairwise_sum;

/// Per-frame mean absolute difference between a latent and the reference latent.
pub fn deviation_strength(z0: &LatentTensor, z_ref: &LatentTensor) -> Result<Vec<f64>> {
    z0.ensure_same_shape(z_ref, "deviation_strength")?;
    let m = z0.frame_len() as f64;
    Ok((0..z0.frames())
        .map(|n| {
            let diffs: Vec<f64> = z0
                .frame(n)
                .iter()
                .zip(z_ref.frame(n))
                .map(|(a, b)| (a - b).abs())
                .collect();
            pairwise_sum(&diffs) / m
        })
        .collect())
}

fn squared_strength_gap(a: &[f64], b: &[f64]) -> f64 {
    let sq: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).collect();
    pairwise_sum(&sq)
}

/// Sum over frames of the squared gap between the deviation strengths of
/// the true and the estimated clean latent.
pub fn stereo_loss(z0: &LatentTensor, z0_hat: &LatentTensor, z_ref: &LatentTensor) -> Result<f64> {
    z0.ensure_same_shape(z0_hat, "stereo_loss")?;
    let s = deviation_strength(z0, z_ref)?;
    let s_hat = deviation_strength(z0_hat, z_ref)?;
    Ok(squared_strength_gap(&s, &s_hat))
}

/// Mean squared error of the noise prediction.
pub fn noise_loss(eps: &LatentTensor, eps_pred: &LatentTensor) -> Result<f64> {
    eps.ensure_same_shape(eps_pred, "noise_loss")?;
    let sq: Vec<f64> = eps
        .data()
        .iter()
        .zip(eps_pred.data())
        .map(|(a, b)| (a - b) * (a - b))
        .collect();
    Ok(pairwise_sum(&sq) / sq.len() as f64)
}

/// Value and gradient of `noise + lambda * stereo`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedLoss {
    pub total: f64,
    pub noise: f64,
    pub stereo: f64,
    /// Derivative of `total` with respect to the predicted noise.
    pub gradient: LatentTensor,
}

/// Subgradient of `|x|` with `sign(0) = 0`.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `l = noise_loss(eps, eps_pred) + lambda * stereo_loss(z0, z0_hat, z_ref)`
/// where `z0_hat` is the clean estimate from `z_t` and `eps_pred`.
#[allow(clippy::too_many_arguments)]
pub fn combined_loss(
    eps: &LatentTensor,
    eps_pred: &LatentTensor,
    z_t: &LatentTensor,
    z0: &LatentTensor,
    z_ref: &LatentTensor,
    t: usize,
    schedule: &NoiseSchedule,
    lambda_loss: f64,
) -> Result<CombinedLoss> {
    if !lambda_loss.is_finite() {
        return Err(Error::NonFinite);
    }
    for (other, what) in [(eps_pred, "eps_pred"), (z_t, "z_t"), (z0, "z0"), (z_ref, "z_ref")] {
        eps.ensure_same_shape(other, what)?;
    }
    let alpha_bar = schedule.alpha_bar(t)?;
    let z0_hat = estimate_clean(z_t, eps_pred, t, schedule)?;

    let noise = noise_loss(eps, eps_pred)?;
    let s = deviation_strength(z0, z_ref)?;
    let s_hat = deviation_strength(&z0_hat, z_ref)?;
    let stereo = squared_strength_gap(&s, &s_hat);

    // d z0_hat / d eps_pred, elementwise
    let dz = -(1.0 - alpha_bar).sqrt() / alpha_bar.sqrt();
    let count = eps.len() as f64;
    let m = eps.frame_len();
    let mut grad = Vec::with_capacity(eps.len());
    for n in 0..eps.frames() {
        let outer = lambda_loss * 2.0 * (s_hat[n] - s[n]) / m as f64;
        for i in n * m..(n + 1) * m {
            let noise_term = 2.0 * (eps_pred.data()[i] - eps.data()[i]) / count;
            let stereo_term = outer * sign(z0_hat.data()[i] - z_ref.data()[i]) * dz;
            grad.push(noise_term + stereo_term);
        }
    }
    Ok(CombinedLoss {
        total: noise + lambda_loss * stereo,
        noise,
        stereo,
        gradient: LatentTensor::new(eps.shape(), grad)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: [usize; 4], f: impl Fn(usize) -> f64) -> LatentTensor {
        LatentTensor::from_fn(shape, f).unwrap()
    }

    #[test]
    fn strength_zero_for_equal_and_constant_offset() {
        let a = t([2, 2, 2, 2], |i| i as f64 * 0.1);
        assert_eq!(deviation_strength(&a, &a).unwrap(), vec![0.0, 0.0]);
        let b = t([2, 2, 2, 2], |i| i as f64 * 0.1 + 0.3);
        for s in deviation_strength(&b, &a).unwrap() {
            assert!((s - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn stereo_loss_scalar_case() {
        let zref = t([1, 1, 1, 1], |_| 0.0);
        let z0 = t([1, 1, 1, 1], |_| 0.3);
        let zh = t([1, 1, 1, 1], |_| 0.1);
        assert!((stereo_loss(&z0, &zh, &zref).unwrap() - 0.04).abs() < 1e-15);
        assert_eq!(stereo_loss(&z0, &z0, &zref).unwrap(), 0.0);
    }

    #[test]
    fn noise_loss_constant_difference() {
        let a = t([1, 2, 3, 4], |i| i as f64);
        let b = t([1, 2, 3, 4], |i| i as f64 + 0.5);
        assert_eq!(noise_loss(&a, &b).unwrap(), 0.25);
        assert_eq!(noise_loss(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn lambda_zero_decouples() {
        let sched = NoiseSchedule::default();
        let shape = [2, 1, 2, 2];
        let eps = t(shape, |i| (i as f64).sin());
        let pred = t(shape, |i| (i as f64).cos());
        let z = t(shape, |i| i as f64 * 0.01);
        let out = combined_loss(&eps, &pred, &z, &z, &z, 10, &sched, 0.0).unwrap();
        assert_eq!(out.total, noise_loss(&eps, &pred).unwrap());
        for i in 0..eps.len() {
            assert_eq!(out.gradient.data()[i], 2.0 * (pred.data()[i] - eps.data()[i]) / 8.0);
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = t([1, 1, 1, 2], |_| 0.0);
        let b = t([1, 1, 2, 1], |_| 0.0);
        assert!(deviation_strength(&a, &b).is_err());
        assert!(noise_loss(&a, &b).is_err());
        assert!(combined_loss(&a, &a, &a, &a, &b, 1, &NoiseSchedule::default(), 0.001).is_err());
    }
}
