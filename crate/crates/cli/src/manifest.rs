//! Batch manifest: one entry per source image with its annotation inputs.

use anyhow::{bail, Context, Result};
use navgeom::objectives::BBox;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub instruction: String,
    pub depth_file: String,
    pub camera_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_bbox: Option<BBox>,
    pub target_world: [f64; 3],
}

impl Manifest {
    /// Parse and structurally validate a manifest. Duplicate ids are fatal;
    /// per-entry file existence is checked later so one bad entry cannot
    /// poison the batch.
    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let file = std::fs::File::open(path)
            .with_context(|| format!("cannot open manifest {}", path.display()))?;
        let manifest: Manifest = serde_json::from_reader(std::io::BufReader::new(file))
            .with_context(|| format!("malformed manifest {}", path.display()))?;
        let mut seen = HashSet::new();
        for entry in &manifest.entries {
            if !seen.insert(entry.id.as_str()) {
                bail!("duplicate manifest id {:?}", entry.id);
            }
            if entry.id.is_empty() || entry.id.contains(['/', '\\']) {
                bail!("manifest id {:?} is not a valid directory name", entry.id);
            }
        }
        let base = path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."))
            .to_path_buf();
        Ok((manifest, base))
    }
}

impl ManifestEntry {
    pub fn depth_path(&self, base: &Path) -> PathBuf {
        base.join(&self.depth_file)
    }

    pub fn camera_path(&self, base: &Path) -> PathBuf {
        base.join(&self.camera_file)
    }

    /// Error if a referenced input is missing on disk.
    pub fn check_inputs(&self, base: &Path) -> Result<()> {
        for path in [self.depth_path(base), self.camera_path(base)] {
            if !path.is_file() {
                bail!("missing input file {}", path.display());
            }
        }
        if let Some(dir) = &self.flow_dir {
            if !base.join(dir).is_dir() {
                bail!("missing flow directory {dir}");
            }
        }
        Ok(())
    }
}
