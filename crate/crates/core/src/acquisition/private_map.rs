use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use super::AcquisitionError;
use crate::corpus::LocalId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrivateMapEntry {
    pub local_id: LocalId,
    pub platform_video_id: String,
}

/// `local_id<TAB>platform_video_id` per line. Kept apart from the manifest
/// and read only when content has to be fetched.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrivateMap {
    entries: Vec<PrivateMapEntry>,
}

impl PrivateMap {
    pub fn entries(&self) -> &[PrivateMapEntry] {
        &self.entries
    }

    pub fn platform_id(&self, id: &LocalId) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| &e.local_id == id)
            .map(|e| e.platform_video_id.as_str())
    }

    pub fn contains_platform_id(&self, platform_id: &str) -> bool {
        self.entries.iter().any(|e| e.platform_video_id == platform_id)
    }

    pub fn push(&mut self, entry: PrivateMapEntry) {
        self.entries.push(entry);
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, AcquisitionError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (local, platform) = line.split_once('\t').ok_or_else(|| AcquisitionError::PrivateMap {
                path: origin.to_owned(),
                message: format!("line {}: expected local_id<TAB>platform_video_id", i + 1),
            })?;
            if local.is_empty() || platform.is_empty() || platform.contains('\t') {
                return Err(AcquisitionError::PrivateMap {
                    path: origin.to_owned(),
                    message: format!("line {}: malformed record", i + 1),
                });
            }
            entries.push(PrivateMapEntry {
                local_id: LocalId::new(local),
                platform_video_id: platform.to_owned(),
            });
        }
        Ok(Self { entries })
    }

    pub fn load_or_default(path: &Path) -> Result<Self, AcquisitionError> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let text = fs::read_to_string(path).map_err(|e| AcquisitionError::PrivateMap {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Appends entries to the file, creating it if needed.
    pub fn append(path: &Path, entries: &[PrivateMapEntry]) -> Result<(), AcquisitionError> {
        let err = |e: std::io::Error| AcquisitionError::PrivateMap {
            path: path.display().to_string(),
            message: e.to_string(),
        };
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(err)?;
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(err)?;
        let mut buf = String::new();
        for e in entries {
            buf.push_str(e.local_id.as_str());
            buf.push('\t');
            buf.push_str(&e.platform_video_id);
            buf.push('\n');
        }
        file.write_all(buf.as_bytes()).map_err(err)?;
        file.sync_all().map_err(err)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_then_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("private_map.tsv");
        let e1 = PrivateMapEntry {
            local_id: "vid_0001".into(),
            platform_video_id: "abc".into(),
        };
        let e2 = PrivateMapEntry {
            local_id: "vid_0002".into(),
            platform_video_id: "def".into(),
        };
        PrivateMap::append(&path, std::slice::from_ref(&e1)).unwrap();
        PrivateMap::append(&path, std::slice::from_ref(&e2)).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "vid_0001\tabc\nvid_0002\tdef\n");
        let map = PrivateMap::load_or_default(&path).unwrap();
        assert_eq!(map.entries(), &[e1, e2]);
        assert_eq!(map.platform_id(&"vid_0002".into()), Some("def"));
        assert!(map.contains_platform_id("abc"));
    }

    #[test]
    fn malformed_line() {
        assert!(PrivateMap::parse("vid_0001 abc\n", "x").is_err());
        assert!(PrivateMap::parse("vid_0001\t\n", "x").is_err());
    }
}
