use crate::error::{Error, Result};

use super::LatentTensor;

/// `beta_1..beta_T` with `alpha_t = 1 - beta_t` and cumulative products
/// `alpha_bar_t`. Timesteps are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub const DEFAULT_STEPS: usize = 1000;
    pub const DEFAULT_BETA_START: f64 = 1e-4;
    pub const DEFAULT_BETA_END: f64 = 0.02;

    /// Linearly spaced betas from `beta_start` to `beta_end`.
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("schedule needs at least one step".into()));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let betas = if steps == 1 {
            vec![beta_start]
        } else {
            let step = (beta_end - beta_start) / (steps - 1) as f64;
            (0..steps).map(|i| beta_start + step * i as f64).collect()
        };
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidParameter("empty schedule".into()));
        }
        if let Some(b) = betas.iter().find(|&&b| !(b > 0.0 && b < 1.0)) {
            return Err(Error::InvalidParameter(format!("beta {b} outside (0, 1)")));
        }
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();
        let alpha_bars: Vec<f64> = alphas
            .iter()
            .scan(1.0, |acc, a| {
                *acc *= a;
                Some(*acc)
            })
            .collect();
        if alpha_bars.windows(2).any(|w| w[1] >= w[0]) || !(*alpha_bars.last().unwrap() > 0.0) {
            return Err(Error::InvalidParameter("alpha_bar must decrease and stay positive".into()));
        }
        Ok(Self {
            betas,
            alphas,
            alpha_bars,
        })
    }

    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        if t == 0 || t > self.steps() {
            return Err(Error::InvalidParameter(format!(
                "timestep {t} outside 1..={}",
                self.steps()
            )));
        }
        Ok(self.alpha_bars[t - 1])
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(Self::DEFAULT_STEPS, Self::DEFAULT_BETA_START, Self::DEFAULT_BETA_END)
            .expect("default schedule is valid")
    }
}

fn check_alpha_bar(alpha_bar: f64) -> Result<()> {
    if !(alpha_bar > 0.0 && alpha_bar <= 1.0) {
        return Err(Error::InvalidParameter(format!("alpha_bar {alpha_bar}")));
    }
    Ok(())
}

/// `z_t = sqrt(a) z0 + sqrt(1 - a) eps` for an explicit `a = alpha_bar`.
pub fn diffuse_with_alpha_bar(z0: &LatentTensor, eps: &LatentTensor, alpha_bar: f64) -> Result<LatentTensor> {
    check_alpha_bar(alpha_bar)?;
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    z0.zip_map(eps, |z, e| a * z + b * e)
}

/// `z0_hat = (z_t - sqrt(1 - a) eps) / sqrt(a)` for an explicit `a = alpha_bar`.
pub fn estimate_clean_with_alpha_bar(
    z_t: &LatentTensor,
    eps_pred: &LatentTensor,
    alpha_bar: f64,
) -> Result<LatentTensor> {
    check_alpha_bar(alpha_bar)?;
    let (a, b) = (alpha_bar.sqrt(), (1.0 - alpha_bar).sqrt());
    z_t.zip_map(eps_pred, |z, e| (z - b * e) / a)
}

/// Samples `z_t` from `z0` at timestep `t`.
pub fn forward_diffuse(
    z0: &LatentTensor,
    t: usize,
    eps: &LatentTensor,
    schedule: &NoiseSchedule,
) -> Result<LatentTensor> {
    diffuse_with_alpha_bar(z0, eps, schedule.alpha_bar(t)?)
}

/// Clean-latent estimate from a noisy latent and predicted noise.
pub fn estimate_clean(
    z_t: &LatentTensor,
    eps_pred: &LatentTensor,
    t: usize,
    schedule: &NoiseSchedule,
) -> Result<LatentTensor> {
    estimate_clean_with_alpha_bar(z_t, eps_pred, schedule.alpha_bar(t)?)
}
