//! The `generate`, `compose` and `metrics` commands.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use stereogen::dvg::{
    fb_confidence, generate_sample, generate_sample_with_view_flows, reprojection_flow, CameraPose,
    FrameDiagnostics, GenerateOptions, Generated, Intrinsics, SceneSpec, StereoShift, synth_scene,
};
use stereogen::imaging::{
    write_flo, write_pfm, write_png_frame, write_png_mask, ConfidenceMap, Frame, OcclusionMask, Raster, VideoClip,
};
use stereogen::metrics::{psnr_report, ssim_report, warp_error_report, MetricReport};
use stereogen::nalgebra::{Matrix3, Vector3};

use crate::config::{CameraConfig, MetricKind, MetricsConfig, PipelineConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::{frame_file, write_manifest, Field, FrameEntry, LoadedManifest, Manifest};

pub const TARGET_DIR: &str = "target";
pub const MASKED_REFERENCE_DIR: &str = "masked_reference";
pub const MASKS_REFINED_DIR: &str = "masks_refined";
pub const MASKS_UNREFINED_DIR: &str = "masks_unrefined";
pub const REPORT_FILE: &str = "report.json";

#[derive(Debug, Clone, Serialize)]
struct FrameReport {
    index: usize,
    #[serde(flatten)]
    diagnostics: FrameDiagnostics,
}

#[derive(Debug, Clone, Serialize)]
struct RunReport<'a> {
    frames: usize,
    stereo: &'a crate::config::StereoConfig,
    camera: &'a Option<CameraConfig>,
    refine: bool,
    hole_fill: bool,
    confidence: stereogen::dvg::FbParams,
    total_unrefined_mask_area: usize,
    total_refined_mask_area: usize,
    per_frame: Vec<FrameReport>,
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(CliError::io(path))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult<()> {
    fs::write(path, bytes).map_err(CliError::io(path))
}

/// Writes frames as `frame_NNNN.png` plus a manifest.
pub fn write_frames(dir: &Path, indices: &[usize], frames: &[Frame]) -> CliResult<()> {
    create_dir(dir)?;
    let encoded = frames
        .par_iter()
        .map(write_png_frame)
        .collect::<stereogen::Result<Vec<_>>>()?;
    let mut manifest = Manifest::default();
    for (&index, bytes) in indices.iter().zip(&encoded) {
        let name = frame_file("frame", index, "png");
        write_file(&dir.join(&name), bytes)?;
        manifest.frames.push(FrameEntry {
            index,
            image: Some(PathBuf::from(name)),
            ..Default::default()
        });
    }
    write_manifest(dir, &manifest)
}

/// Writes masks as `mask_NNNN.png` plus a manifest.
pub fn write_masks(dir: &Path, indices: &[usize], masks: &[OcclusionMask]) -> CliResult<()> {
    create_dir(dir)?;
    let encoded = masks
        .par_iter()
        .map(write_png_mask)
        .collect::<stereogen::Result<Vec<_>>>()?;
    let mut manifest = Manifest::default();
    for (&index, bytes) in indices.iter().zip(&encoded) {
        let name = frame_file("mask", index, "png");
        write_file(&dir.join(&name), bytes)?;
        manifest.frames.push(FrameEntry {
            index,
            mask: Some(PathBuf::from(name)),
            ..Default::default()
        });
    }
    write_manifest(dir, &manifest)
}

fn camera_flows(
    cam: &CameraConfig,
    depths: &[stereogen::imaging::DepthMap],
    indices: &[usize],
) -> CliResult<Vec<stereogen::imaging::FlowField>> {
    let intr = Intrinsics {
        fx: cam.fx,
        fy: cam.fy,
        cx: cam.cx,
        cy: cam.cy,
    };
    let src = CameraPose::identity(intr)?;
    let dst = CameraPose::new(intr, Matrix3::identity(), Vector3::from(cam.baseline))?;
    depths
        .iter()
        .zip(indices)
        .map(|(d, &i)| {
            reprojection_flow(d, &src, &dst, cam.depth_scale, cam.depth_shift)
                .map_err(|e| CliError::at_frame(i)(e.into()))
        })
        .collect()
}

/// Runs the paired-view pipeline on a manifest and writes the outputs.
pub fn cmd_generate(cfg: &PipelineConfig) -> CliResult<Generated> {
    let input = LoadedManifest::load(&cfg.manifest)?;
    input.require(Field::Image, false)?;
    input.require(Field::Depth, false)?;
    input.require(Field::FlowFwd, true)?;
    input.require(Field::FlowBwd, true)?;

    let indices = input.indices();
    let frames = input.frames()?;
    let depths = input.depths()?;
    let flows_fwd = input.flows_fwd()?;
    let flows_bwd = input.flows_bwd()?;
    if let Some((i, _)) = frames.iter().enumerate().find(|(_, f)| !f.same_dims(&frames[0])) {
        return Err(CliError::at_frame(indices[i])(CliError::Input(format!(
            "frame is {}x{}, expected {}x{}",
            frames[i].width(),
            frames[i].height(),
            frames[0].width(),
            frames[0].height()
        ))));
    }
    let clip = VideoClip::new(frames)?;

    let options = GenerateOptions {
        refine: cfg.refine,
        fb: cfg.confidence,
        hole_fill: cfg.hole_fill,
    };
    let relabel = |e: stereogen::Error| match e {
        stereogen::Error::AtFrame { index, source } => CliError::at_frame(indices[index])(CliError::Core(*source)),
        e => CliError::Core(e),
    };
    let generated = match &cfg.camera {
        Some(cam) => {
            let view = camera_flows(cam, &depths, &indices)?;
            generate_sample_with_view_flows(&clip, &depths, &view, &flows_fwd, &flows_bwd, &options)
        }
        None => {
            let shift = StereoShift::new(cfg.stereo.gain, cfg.stereo.direction)?;
            generate_sample(&clip, &depths, &flows_fwd, &flows_bwd, shift, &options)
        }
    }
    .map_err(relabel)?;

    let out = &cfg.output;
    create_dir(out)?;
    let sample = &generated.sample;
    write_frames(&out.join(TARGET_DIR), &indices, sample.target_view.frames())?;
    write_frames(&out.join(MASKED_REFERENCE_DIR), &indices, sample.masked_reference.frames())?;
    write_masks(&out.join(MASKS_REFINED_DIR), &indices, &sample.masks)?;
    write_masks(&out.join(MASKS_UNREFINED_DIR), &indices, &generated.unrefined_masks)?;

    let report = RunReport {
        frames: indices.len(),
        stereo: &cfg.stereo,
        camera: &cfg.camera,
        refine: cfg.refine,
        hole_fill: cfg.hole_fill,
        confidence: cfg.confidence,
        total_unrefined_mask_area: generated.diagnostics.iter().map(|d| d.unrefined_mask_area).sum(),
        total_refined_mask_area: generated.diagnostics.iter().map(|d| d.refined_mask_area).sum(),
        per_frame: indices
            .iter()
            .zip(&generated.diagnostics)
            .map(|(&index, d)| FrameReport {
                index,
                diagnostics: d.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    write_file(&out.join(REPORT_FILE), format!("{json}\n").as_bytes())?;
    Ok(generated)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ComposeMode {
    /// Left and right frames next to each other.
    Sbs,
    /// Red from the left view, green and blue from the right.
    Anaglyph,
}

/// Combines two equally sized clips into one stereo clip.
pub fn compose(left: &VideoClip, right: &VideoClip, mode: ComposeMode) -> CliResult<VideoClip> {
    if left.len() != right.len() || left.width() != right.width() || left.height() != right.height() {
        return Err(CliError::Input(format!(
            "left clip is {} frames of {}x{}, right clip is {} frames of {}x{}",
            left.len(),
            left.width(),
            left.height(),
            right.len(),
            right.width(),
            right.height()
        )));
    }
    let (w, h) = (left.width(), left.height());
    let frames = left
        .frames()
        .iter()
        .zip(right.frames())
        .map(|(l, r)| match mode {
            ComposeMode::Sbs => Frame::from_fn(2 * w, h, |x, y| if x < w { l.pixel(x, y) } else { r.pixel(x - w, y) }),
            ComposeMode::Anaglyph => Frame::from_fn(w, h, |x, y| {
                let (a, b) = (l.pixel(x, y), r.pixel(x, y));
                [a[0], b[1], b[2]]
            }),
        })
        .collect::<stereogen::Result<Vec<_>>>()?;
    Ok(VideoClip::new(frames)?)
}

/// Indices present in both manifests; the smallest unmatched index is an error.
fn paired_indices(a: &LoadedManifest, b: &LoadedManifest) -> CliResult<Vec<usize>> {
    let sa: BTreeSet<usize> = a.indices().into_iter().collect();
    let sb: BTreeSet<usize> = b.indices().into_iter().collect();
    if let Some(&i) = sa.symmetric_difference(&sb).next() {
        return Err(CliError::UnpairedFrame(i));
    }
    Ok(sa.into_iter().collect())
}

pub fn cmd_compose(left: &Path, right: &Path, mode: ComposeMode, out: &Path) -> CliResult<VideoClip> {
    let l = LoadedManifest::load(left)?;
    let r = LoadedManifest::load(right)?;
    let indices = paired_indices(&l, &r)?;
    l.require(Field::Image, false)?;
    r.require(Field::Image, false)?;
    let clip = compose(&l.clip()?, &r.clip()?, mode)?;
    write_frames(out, &indices, clip.frames())?;
    Ok(clip)
}

fn warp_report(cfg: &MetricsConfig, generated: &LoadedManifest, clip: &VideoClip) -> CliResult<MetricReport> {
    let flows = LoadedManifest::load(cfg.flows.as_deref().unwrap_or(&cfg.reference))?;
    paired_indices(generated, &flows)?;
    flows.require(Field::FlowFwd, true)?;
    let fwd = flows.flows_fwd()?;
    let has_bwd = flows.entries()[..flows.entries().len() - 1]
        .iter()
        .all(|e| e.flow_bwd.is_some());
    let conf = if has_bwd {
        let bwd = flows.flows_bwd()?;
        fwd.iter()
            .zip(&bwd)
            .map(|(f, b)| fb_confidence(f, b, cfg.confidence))
            .collect::<stereogen::Result<Vec<_>>>()?
    } else {
        fwd.iter()
            .map(|f| ConfidenceMap::filled(f.width(), f.height(), 1.0))
            .collect::<stereogen::Result<Vec<_>>>()?
    };
    let params = BTreeMap::from([
        ("alpha".to_string(), cfg.confidence.alpha),
        ("beta".to_string(), cfg.confidence.beta),
        ("fb_confidence".to_string(), if has_bwd { 1.0 } else { 0.0 }),
    ]);
    Ok(warp_error_report(clip, &fwd, &conf, params)?)
}

/// Evaluates the selected metrics and writes `<metric>.json` per metric.
pub fn cmd_metrics(cfg: &MetricsConfig) -> CliResult<Vec<MetricReport>> {
    let generated = LoadedManifest::load(&cfg.generated)?;
    let reference = LoadedManifest::load(&cfg.reference)?;
    paired_indices(&generated, &reference)?;
    generated.require(Field::Image, false)?;
    let gen_clip = generated.clip()?;
    let needs_reference = cfg.metrics.iter().any(|m| *m != MetricKind::WarpError);
    let ref_clip = if needs_reference {
        reference.require(Field::Image, false)?;
        Some(reference.clip()?)
    } else {
        None
    };

    let mut reports = Vec::new();
    for kind in &cfg.metrics {
        let mut report = match kind {
            MetricKind::Psnr => psnr_report(&gen_clip, ref_clip.as_ref().expect("loaded above"))?,
            MetricKind::Ssim => ssim_report(&gen_clip, ref_clip.as_ref().expect("loaded above"))?,
            MetricKind::WarpError => warp_report(cfg, &generated, &gen_clip)?,
        };
        // report frame indices, not positions
        let idx = generated.indices();
        report.skipped = report.skipped.iter().map(|&p| idx[p]).collect();
        reports.push(report);
    }
    create_dir(&cfg.output)?;
    for r in &reports {
        let json = serde_json::to_string_pretty(r).map_err(|e| CliError::Input(e.to_string()))?;
        write_file(&cfg.output.join(format!("{}.json", r.metric)), format!("{json}\n").as_bytes())?;
    }
    Ok(reports)
}

/// Writes a synthetic scene (frames, depths, both flow directions) as a
/// ready-to-run input manifest.
pub fn write_scene(dir: &Path, spec: &SceneSpec) -> CliResult<()> {
    let scene = synth_scene(spec)?;
    create_dir(dir)?;
    let n = scene.clip.len();
    let mut manifest = Manifest::default();
    for t in 0..n {
        let mut entry = FrameEntry {
            index: t,
            ..Default::default()
        };
        let image = frame_file("frame", t, "png");
        write_file(&dir.join(&image), &write_png_frame(&scene.clip.frames()[t])?)?;
        entry.image = Some(image.into());
        let depth = frame_file("depth", t, "pfm");
        write_file(&dir.join(&depth), &write_pfm(&scene.depths[t]))?;
        entry.depth = Some(depth.into());
        if t + 1 < n {
            let fwd = frame_file("flow_fwd", t, "flo");
            write_file(&dir.join(&fwd), &write_flo(&scene.flows_fwd[t]))?;
            entry.flow_fwd = Some(fwd.into());
            let bwd = frame_file("flow_bwd", t, "flo");
            write_file(&dir.join(&bwd), &write_flo(&scene.flows_bwd[t]))?;
            entry.flow_bwd = Some(bwd.into());
        }
        manifest.frames.push(entry);
    }
    write_manifest(dir, &manifest)
}
