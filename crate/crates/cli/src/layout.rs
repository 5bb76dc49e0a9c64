//! On-disk dataset layout.
//!
//! ```text
//! <root>/<timbre>/<split>/<seed>.wav
//! <root>/<timbre>/<split>/.config-hash
//! <root>/manifests/base_<timbre>_<split>.manifest
//! <root>/manifests/<shift>.manifest
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use melodyforge::shiftlab::Split;
use melodyforge::synth::Waveshape;

use crate::error::CliError;

const STAMP: &str = ".config-hash";

#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: &Path) -> Self {
        Layout {
            root: root.to_path_buf(),
        }
    }

    pub fn manifests_dir(&self) -> PathBuf {
        self.root.join("manifests")
    }

    pub fn base_manifest(&self, timbre: Waveshape, split: Split) -> PathBuf {
        self.manifests_dir().join(format!("base_{timbre}_{split}.manifest"))
    }

    pub fn named_manifest(&self, name: &str) -> PathBuf {
        self.manifests_dir().join(format!("{name}.manifest"))
    }

    pub fn audio_dir(&self, timbre: Waveshape, split: Split) -> PathBuf {
        self.root.join(timbre.as_str()).join(split.as_str())
    }

    /// Every base manifest present, in name order.
    pub fn base_manifests(&self) -> Result<Vec<PathBuf>, CliError> {
        let dir = self.manifests_dir();
        let entries = match fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(CliError::io(dir, e)),
        };
        let mut out = Vec::new();
        for entry in entries {
            let path = entry.map_err(|e| CliError::io(&dir, e))?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with("base_") && name.ends_with(".manifest") {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Records `hash` as the config of a timbre/split directory, or fails
    /// if the directory was rendered under another config.
    pub fn claim_audio_dir(&self, timbre: Waveshape, split: Split, hash: &str) -> Result<(), CliError> {
        let dir = self.audio_dir(timbre, split);
        let stamp = dir.join(STAMP);
        match fs::read_to_string(&stamp) {
            Ok(found) if found.trim() == hash => Ok(()),
            Ok(found) => Err(CliError::Usage(format!(
                "{} was rendered with config {}, not {hash}; use another --root",
                dir.display(),
                found.trim()
            ))),
            Err(e) if e.kind() == io::ErrorKind::NotFound => {
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                fs::write(&stamp, format!("{hash}\n")).map_err(|e| CliError::io(&stamp, e))
            }
            Err(e) => Err(CliError::io(stamp, e)),
        }
    }
}
