//! Frame manifests: a TOML list of per-frame file paths.
//!
//! ```toml
//! [[frames]]
//! index = 0
//! image = "frame_0000.png"
//! depth = "depth_0000.pfm"
//! flow_fwd = "flow_fwd_0000.flo"   # frame 0 -> frame 1
//! flow_bwd = "flow_bwd_0000.flo"   # frame 1 -> frame 0
//! mask = "mask_0000.png"
//! ```
//!
//! Paths are relative to the manifest's directory. Frames are ordered by
//! `index`; flows live on the earlier frame of each pair.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stereogen::imaging::{
    read_flo, read_pfm, read_png_frame, read_png_mask, DepthMap, FlowField, Frame, OcclusionMask,
    VideoClip,
};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    #[serde(default)]
    pub frames: Vec<FrameEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameEntry {
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_fwd: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_bwd: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
}

/// Which file of an entry to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Image,
    Depth,
    FlowFwd,
    FlowBwd,
    Mask,
}

impl Field {
    fn name(self) -> &'static str {
        match self {
            Field::Image => "image",
            Field::Depth => "depth",
            Field::FlowFwd => "flow_fwd",
            Field::FlowBwd => "flow_bwd",
            Field::Mask => "mask",
        }
    }
}

impl FrameEntry {
    pub fn get(&self, field: Field) -> Option<&Path> {
        match field {
            Field::Image => self.image.as_deref(),
            Field::Depth => self.depth.as_deref(),
            Field::FlowFwd => self.flow_fwd.as_deref(),
            Field::FlowBwd => self.flow_bwd.as_deref(),
            Field::Mask => self.mask.as_deref(),
        }
    }
}

/// A parsed manifest with entries sorted by index.
#[derive(Debug, Clone)]
pub struct LoadedManifest {
    pub path: PathBuf,
    pub dir: PathBuf,
    pub manifest: Manifest,
}

/// Accepts either a manifest file or a directory containing `manifest.toml`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

impl LoadedManifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let path = manifest_path(path);
        let text = fs::read_to_string(&path).map_err(CliError::io(&path))?;
        let mut manifest: Manifest =
            toml::from_str(&text).map_err(|e| CliError::config(&path, e.to_string()))?;
        if manifest.frames.is_empty() {
            return Err(CliError::config(&path, "manifest lists no frames"));
        }
        manifest.frames.sort_by_key(|f| f.index);
        if let Some(w) = manifest.frames.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(CliError::config(&path, format!("duplicate frame index {}", w[0].index)));
        }
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { path, dir, manifest })
    }

    pub fn entries(&self) -> &[FrameEntry] {
        &self.manifest.frames
    }

    pub fn indices(&self) -> Vec<usize> {
        self.entries().iter().map(|e| e.index).collect()
    }

    fn resolve(&self, entry: &FrameEntry, field: Field) -> CliResult<PathBuf> {
        let rel = entry.get(field).ok_or_else(|| {
            CliError::at_frame(entry.index)(CliError::config(
                &self.path,
                format!("missing `{}`", field.name()),
            ))
        })?;
        Ok(self.dir.join(rel))
    }

    /// Fails on the first entry whose `field` is unset or names a missing
    /// file. `pairs_only` skips the last entry, which has no flow.
    pub fn require(&self, field: Field, pairs_only: bool) -> CliResult<()> {
        let n = self.entries().len();
        let take = if pairs_only { n.saturating_sub(1) } else { n };
        for entry in &self.entries()[..take] {
            let p = self.resolve(entry, field)?;
            if !p.is_file() {
                return Err(CliError::at_frame(entry.index)(CliError::Input(format!(
                    "{}: missing {} file",
                    p.display(),
                    field.name()
                ))));
            }
        }
        Ok(())
    }

    fn read_all<T>(
        &self,
        field: Field,
        pairs_only: bool,
        decode: fn(&[u8]) -> stereogen::Result<T>,
    ) -> CliResult<Vec<T>> {
        let n = self.entries().len();
        let take = if pairs_only { n.saturating_sub(1) } else { n };
        self.entries()[..take]
            .iter()
            .map(|entry| {
                let read = || -> CliResult<T> {
                    let p = self.resolve(entry, field)?;
                    let bytes = fs::read(&p).map_err(CliError::io(&p))?;
                    decode(&bytes).map_err(CliError::decode(&p))
                };
                read().map_err(|e| match e {
                    e @ CliError::Frame { .. } => e,
                    e => CliError::at_frame(entry.index)(e),
                })
            })
            .collect()
    }

    pub fn frames(&self) -> CliResult<Vec<Frame>> {
        self.read_all(Field::Image, false, read_png_frame)
    }

    pub fn clip(&self) -> CliResult<VideoClip> {
        Ok(VideoClip::new(self.frames()?)?)
    }

    pub fn depths(&self) -> CliResult<Vec<DepthMap>> {
        self.read_all(Field::Depth, false, read_pfm)
    }

    pub fn flows_fwd(&self) -> CliResult<Vec<FlowField>> {
        self.read_all(Field::FlowFwd, true, read_flo)
    }

    pub fn flows_bwd(&self) -> CliResult<Vec<FlowField>> {
        self.read_all(Field::FlowBwd, true, read_flo)
    }

    pub fn masks(&self) -> CliResult<Vec<OcclusionMask>> {
        self.read_all(Field::Mask, false, read_png_mask)
    }
}

/// Writes `manifest.toml` into `dir`.
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> CliResult<()> {
    let path = dir.join(MANIFEST_FILE);
    let text = toml::to_string(manifest).map_err(|e| CliError::config(&path, e.to_string()))?;
    fs::write(&path, text).map_err(CliError::io(&path))
}

pub fn frame_file(prefix: &str, index: usize, ext: &str) -> String {
    format!("{prefix}_{index:04}.{ext}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> (tempfile::TempDir, CliResult<LoadedManifest>) {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), text).unwrap();
        let m = LoadedManifest::load(dir.path());
        (dir, m)
    }

    #[test]
    fn sorts_by_index() {
        let (_d, m) = load("[[frames]]\nindex = 5\n\n[[frames]]\nindex = 2\n");
        assert_eq!(m.unwrap().indices(), vec![2, 5]);
    }

    #[test]
    fn rejects_duplicates_empty_and_unknown_keys() {
        for text in ["[[frames]]\nindex = 1\n\n[[frames]]\nindex = 1\n", "", "[[frames]]\nindex = 0\nimg = \"a\"\n"] {
            let (_d, m) = load(text);
            assert!(matches!(m, Err(CliError::Config { .. })), "{text:?}");
        }
    }

    #[test]
    fn missing_field_names_the_frame() {
        let (_d, m) = load("[[frames]]\nindex = 0\nimage = \"a.png\"\n\n[[frames]]\nindex = 7\n");
        let m = m.unwrap();
        let err = m.require(Field::Image, false).unwrap_err();
        // frame 0 names a file that does not exist either
        assert!(matches!(err, CliError::Frame { index: 0, .. }), "{err}");
        let err = m.require(Field::FlowFwd, true).unwrap_err();
        assert!(err.to_string().starts_with("frame 0:"), "{err}");
    }

    #[test]
    fn round_trips_through_toml() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = Manifest {
            frames: vec![FrameEntry {
                index: 3,
                image: Some(frame_file("frame", 3, "png").into()),
                mask: Some("m.png".into()),
                ..Default::default()
            }],
        };
        write_manifest(dir.path(), &manifest).unwrap();
        assert_eq!(LoadedManifest::load(dir.path()).unwrap().manifest, manifest);
        assert_eq!(frame_file("depth", 12, "pfm"), "depth_0012.pfm");
    }
}
