//! TOML run configurations. Relative paths are resolved against the
//! directory of the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use stereogen::dvg::{Direction, FbParams};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StereoConfig {
    /// Maximum horizontal disparity in pixels.
    pub gain: f32,
    pub direction: Direction,
}

impl Default for StereoConfig {
    fn default() -> Self {
        Self {
            gain: 4.0,
            direction: Direction::Right,
        }
    }
}

/// Pinhole rig used instead of the disparity model: the target camera is
/// the reference camera moved by `baseline` (camera frame, same rotation).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraConfig {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub baseline: [f64; 3],
    /// Metric depth is `1 / (depth_scale * D + depth_shift)`.
    #[serde(default = "one")]
    pub depth_scale: f64,
    #[serde(default)]
    pub depth_shift: f64,
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Input manifest (file or directory holding `manifest.toml`).
    pub manifest: PathBuf,
    /// Output directory; created if needed.
    pub output: PathBuf,
    #[serde(default)]
    pub stereo: StereoConfig,
    #[serde(default = "yes")]
    pub refine: bool,
    #[serde(default)]
    pub confidence: FbParams,
    #[serde(default = "yes")]
    pub hole_fill: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub camera: Option<CameraConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Psnr,
    Ssim,
    WarpError,
}

impl MetricKind {
    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Psnr => "psnr",
            MetricKind::Ssim => "ssim",
            MetricKind::WarpError => "warp_error",
        }
    }
}

fn all_metrics() -> Vec<MetricKind> {
    vec![MetricKind::Psnr, MetricKind::Ssim, MetricKind::WarpError]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Manifest of the frames under evaluation.
    pub generated: PathBuf,
    /// Manifest of the ground-truth frames, paired by index.
    pub reference: PathBuf,
    /// Manifest providing `flow_fwd` (and optionally `flow_bwd`) for the
    /// warping error; defaults to `reference`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flows: Option<PathBuf>,
    pub output: PathBuf,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub confidence: FbParams,
}

fn load<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    toml::from_str(&text).map_err(|e| CliError::config(path, e.to_string()))
}

fn rebase(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg: Self = load(path)?;
        let base = base_dir(path);
        rebase(&base, &mut cfg.manifest);
        rebase(&base, &mut cfg.output);
        cfg.validate(path)?;
        Ok(cfg)
    }

    pub fn validate(&self, path: &Path) -> CliResult<()> {
        let g = self.stereo.gain;
        if !(g.is_finite() && g >= 0.0) {
            return Err(CliError::config(path, format!("stereo gain {g} must be finite and non-negative")));
        }
        self.confidence
            .validate()
            .map_err(|e| CliError::config(path, e.to_string()))
    }
}

impl MetricsConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let mut cfg: Self = load(path)?;
        let base = base_dir(path);
        rebase(&base, &mut cfg.generated);
        rebase(&base, &mut cfg.reference);
        rebase(&base, &mut cfg.output);
        if let Some(f) = cfg.flows.as_mut() {
            rebase(&base, f);
        }
        if cfg.metrics.is_empty() {
            return Err(CliError::config(path, "no metrics selected"));
        }
        cfg.confidence
            .validate()
            .map_err(|e| CliError::config(path, e.to_string()))?;
        Ok(cfg)
    }
}
