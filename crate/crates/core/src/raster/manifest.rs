//! Series manifests: a JSON array of
//! `{"id", "timestamp", "data", "mask"?, "label"?}` entries.
//!
//! Relative paths resolve against the manifest's own directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{load_image, ClassMap, MultispectralImage, Timestamp};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub timestamp: Timestamp,
    pub data: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    base: PathBuf,
}

impl Manifest {
    pub fn new(entries: Vec<ManifestEntry>, base: impl Into<PathBuf>) -> Self {
        Manifest {
            entries,
            base: base.into(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let entries: Vec<ManifestEntry> = serde_json::from_str(&text)?;
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = entries.iter().find(|e| !seen.insert(e.id.as_str())) {
            return Err(Error::invalid(format!(
                "duplicate image id {:?} in manifest",
                dup.id
            )));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Manifest { entries, base })
    }

    /// Writes the entries as pretty JSON; paths are stored as given.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut json = serde_json::to_string_pretty(&self.entries)?;
        json.push('\n');
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn is_time_ordered(&self) -> bool {
        self.entries
            .windows(2)
            .all(|w| w[0].timestamp <= w[1].timestamp)
    }

    /// Stable sort by timestamp. Returns whether the order changed.
    pub fn sort_by_time(&mut self) -> bool {
        if self.is_time_ordered() {
            return false;
        }
        self.entries.sort_by_key(|e| e.timestamp);
        true
    }

    pub fn load_image(&self, entry: &ManifestEntry) -> Result<MultispectralImage> {
        let mask = entry.mask.as_deref().map(|m| self.resolve(m));
        load_image(
            self.resolve(&entry.data),
            mask.as_deref(),
            entry.timestamp,
            entry.id.clone(),
        )
    }

    pub fn load_label(&self, entry: &ManifestEntry) -> Result<ClassMap> {
        let label = entry
            .label
            .as_deref()
            .ok_or_else(|| Error::invalid(format!("manifest entry {:?} has no label", entry.id)))?;
        ClassMap::load(self.resolve(label))
    }
}
