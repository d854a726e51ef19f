//! Manifests describing which prediction files belong to which model.
//!
//! A manifest is a JSON document:
//!
//! ```json
//! {
//!   "entries": [
//!     {"name": "resnet-cal", "model": "resnet", "path": "resnet_cal.calp", "role": "calibration"},
//!     {"name": "resnet-test", "model": "resnet", "path": "resnet_test.calp", "role": "test"},
//!     {"name": "resnet-fog-3", "model": "resnet", "path": "fog3.csv", "role": "test",
//!      "corruption": "fog", "severity": 3, "content": "probabilities", "exclude": [4, 17]}
//!   ]
//! }
//! ```
//!
//! Relative paths resolve against the manifest's directory. `format` is
//! optional (detected from the file), `content` defaults to `logits`, and
//! `exclude` lists row indices dropped before evaluation; without it entries
//! are evaluated as given.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_predictions, read_predictions_as, Content, Format};
use crate::prediction::PredictionSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Calibration,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub name: String,
    pub model: String,
    pub path: PathBuf,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(default)]
    pub content: Content,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corruption: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity: Option<u8>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<usize>,
}

impl ManifestEntry {
    pub fn is_shifted(&self) -> bool {
        self.corruption.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory relative paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest = Self::from_json(&text).map_err(|e| match e {
            Error::Validation(msg) => Error::format(path, msg),
            other => other,
        })?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let manifest: Manifest = serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("invalid manifest: {e}")))?;
        manifest.validate()?;
        Ok(manifest)
    }

    /// Structural checks: unique names, severity 1-5 present iff a
    /// corruption is named, and at most one calibration entry per model.
    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::validation("manifest has no entries"));
        }
        let mut names = HashSet::new();
        let mut calibration: BTreeMap<&str, &str> = BTreeMap::new();
        for e in &self.entries {
            let fail = |message: String| Error::Manifest {
                entry: e.name.clone(),
                message,
            };
            if !names.insert(e.name.as_str()) {
                return Err(fail("duplicate entry name".into()));
            }
            match (&e.corruption, e.severity) {
                (Some(_), None) => return Err(fail("corruption given without a severity".into())),
                (None, Some(_)) => return Err(fail("severity given without a corruption".into())),
                (Some(_), Some(s)) if !(1..=5).contains(&s) => {
                    return Err(fail(format!("severity {s} is outside 1-5")))
                }
                _ => {}
            }
            if e.role == Role::Calibration {
                if let Some(other) = calibration.insert(&e.model, &e.name) {
                    return Err(fail(format!(
                        "model `{}` already has calibration entry `{other}`",
                        e.model
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Model names in order of first appearance.
    pub fn models(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.model.as_str()) {
                seen.push(e.model.as_str());
            }
        }
        seen
    }

    /// Reads and validates every entry's predictions.
    pub fn load(&self) -> Result<Vec<LoadedEntry>> {
        let mut loaded: Vec<LoadedEntry> = Vec::with_capacity(self.entries.len());
        for entry in &self.entries {
            let path = self.resolve(entry);
            let set = match entry.format {
                Some(f) => read_predictions_as(&path, f, entry.content),
                None => read_predictions(&path, entry.content),
            }
            .and_then(|set| {
                if entry.exclude.is_empty() {
                    Ok(set)
                } else {
                    set.without(&entry.exclude)
                }
            })
            .map_err(|e| e.in_entry(&entry.name))?;
            if let Some(prev) = loaded.iter().find(|l| l.entry.model == entry.model) {
                if prev.set.classes() != set.classes() {
                    return Err(Error::Manifest {
                        entry: entry.name.clone(),
                        message: format!(
                            "has {} classes but `{}` of model `{}` has {}",
                            set.classes(),
                            prev.entry.name,
                            entry.model,
                            prev.set.classes()
                        ),
                    });
                }
            }
            loaded.push(LoadedEntry {
                entry: entry.clone(),
                set,
            });
        }
        Ok(loaded)
    }
}

#[derive(Debug, Clone)]
pub struct LoadedEntry {
    pub entry: ManifestEntry,
    pub set: PredictionSet,
}
