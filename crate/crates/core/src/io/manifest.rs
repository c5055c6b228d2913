//! Dataset manifests tying a label space to frame files and train/test
//! splits. Relative paths resolve against the manifest's directory.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "label_space": "labels.toml",
//!   "frame_files": ["frames.jsonl"],
//!   "splits": {"train": ["f0", "f1"], "test": ["f2"]}
//! }
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::LabelSpace;

use super::frames::{FrameReader, FrameRecord};
use super::SCHEMA_VERSION;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Splits {
    #[serde(default)]
    pub train: Vec<String>,
    #[serde(default)]
    pub test: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub schema_version: u32,
    pub label_space: PathBuf,
    pub frame_files: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probability_maps: Option<PathBuf>,
    #[serde(default)]
    pub splits: Splits,
}

impl Manifest {
    /// Parses and checks everything that does not touch the filesystem.
    pub fn parse(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Manifest(format!(
                "unsupported schema_version {}",
                self.schema_version
            )));
        }
        if self.frame_files.is_empty() {
            return Err(Error::Manifest("no frame files listed".into()));
        }
        for (name, ids) in [("train", &self.splits.train), ("test", &self.splits.test)] {
            let mut seen = HashSet::new();
            if let Some(dup) = ids.iter().find(|id| !seen.insert(id.as_str())) {
                return Err(Error::Manifest(format!(
                    "duplicate id `{dup}` in {name} split"
                )));
            }
        }
        let train: HashSet<&str> = self.splits.train.iter().map(String::as_str).collect();
        if let Some(id) = self
            .splits
            .test
            .iter()
            .find(|id| train.contains(id.as_str()))
        {
            return Err(Error::Manifest(format!("id `{id}` is in both splits")));
        }
        Ok(())
    }

    pub fn to_string_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A manifest whose referenced files were found, with its label space
/// loaded.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    pub manifest: Manifest,
    pub label_space: LabelSpace,
}

impl Dataset {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let manifest = Manifest::parse(&std::fs::read_to_string(path)?)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        let resolve = |p: &Path| root.join(p);
        for f in &manifest.frame_files {
            if !resolve(f).is_file() {
                return Err(Error::MissingFile(resolve(f)));
            }
        }
        if let Some(dir) = &manifest.probability_maps {
            if !resolve(dir).is_dir() {
                return Err(Error::MissingFile(resolve(dir)));
            }
        }
        let label_space = LabelSpace::load(resolve(&manifest.label_space))?;
        Ok(Dataset {
            root,
            manifest,
            label_space,
        })
    }

    pub fn frame_paths(&self) -> Vec<PathBuf> {
        self.manifest
            .frame_files
            .iter()
            .map(|f| self.root.join(f))
            .collect()
    }

    pub fn probability_map_dir(&self) -> Option<PathBuf> {
        self.manifest
            .probability_maps
            .as_ref()
            .map(|d| self.root.join(d))
    }

    /// Streams every record of every frame file in manifest order.
    pub fn frames(&self) -> impl Iterator<Item = Result<FrameRecord>> + '_ {
        self.frame_paths().into_iter().flat_map(move |p| {
            let it: Box<dyn Iterator<Item = Result<FrameRecord>>> =
                match FrameReader::open(&p, &self.label_space) {
                    Ok(r) => Box::new(r),
                    Err(e) => Box::new(std::iter::once(Err(e))),
                };
            it
        })
    }

    /// Records of the train and test splits, each in split-list order.
    /// Every listed id must occur exactly once across the frame files.
    pub fn load_splits(&self) -> Result<(Vec<FrameRecord>, Vec<FrameRecord>)> {
        let mut by_id = std::collections::HashMap::new();
        for r in self.frames() {
            let r = r?;
            if by_id.contains_key(&r.frame_id) {
                return Err(Error::Manifest(format!(
                    "frame id `{}` appears twice",
                    r.frame_id
                )));
            }
            by_id.insert(r.frame_id.clone(), r);
        }
        let take = |ids: &[String]| -> Result<Vec<FrameRecord>> {
            ids.iter()
                .map(|id| {
                    by_id
                        .get(id)
                        .cloned()
                        .ok_or_else(|| Error::Manifest(format!("split id `{id}` not found")))
                })
                .collect()
        };
        Ok((
            take(&self.manifest.splits.train)?,
            take(&self.manifest.splits.test)?,
        ))
    }
}
