use std::path::{Path, PathBuf};

use super::BackboneError;
use crate::corpus::LocalId;
use crate::tensor_file::{self, TensorFileError};

/// `T x D` backbone embeddings for one video, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    pub local_id: LocalId,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureSequence {
    pub fn new(local_id: LocalId, dim: usize, data: Vec<f32>) -> Result<Self, BackboneError> {
        if dim == 0 || data.is_empty() || data.len() % dim != 0 {
            return Err(BackboneError::ShapeMismatch(format!(
                "{} values do not form rows of {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(BackboneError::NonFinite(local_id.to_string()));
        }
        Ok(Self { local_id, dim, data })
    }

    pub fn steps(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f32] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn save(&self, stem: &Path) -> Result<(), BackboneError> {
        tensor_file::write(stem, self.local_id.as_str(), &[self.steps(), self.dim], &self.data)?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self, BackboneError> {
        let file = tensor_file::read(stem)?;
        match file.sidecar.shape[..] {
            [_, d] => Self::new(LocalId::new(file.sidecar.local_id), d, file.data),
            _ => Err(BackboneError::ShapeMismatch(format!(
                "feature file {} has shape {:?}, expected [T, D]",
                stem.display(),
                file.sidecar.shape
            ))),
        }
    }
}

/// `<root>/<backbone>/<local_id>.f32` + `.json`.
#[derive(Debug, Clone)]
pub struct FeatureCache {
    root: PathBuf,
}

impl FeatureCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn stem(&self, backbone: &str, id: &LocalId) -> PathBuf {
        self.root.join(backbone).join(id.as_str())
    }

    pub fn contains(&self, backbone: &str, id: &LocalId) -> bool {
        tensor_file::data_path(&self.stem(backbone, id)).is_file()
            && tensor_file::sidecar_path(&self.stem(backbone, id)).is_file()
    }

    pub fn store(&self, backbone: &str, features: &FeatureSequence) -> Result<PathBuf, BackboneError> {
        let stem = self.stem(backbone, &features.local_id);
        features.save(&stem)?;
        Ok(stem)
    }

    pub fn load(&self, backbone: &str, id: &LocalId) -> Result<FeatureSequence, BackboneError> {
        FeatureSequence::load(&self.stem(backbone, id))
    }

    /// Every cached id for a backbone, sorted.
    pub fn ids(&self, backbone: &str) -> Result<Vec<LocalId>, BackboneError> {
        let dir = self.root.join(backbone);
        let entries = match std::fs::read_dir(&dir) {
            Ok(e) => e,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(source) => return Err(TensorFileError::Io { path: dir, source }.into()),
        };
        let mut ids: Vec<LocalId> = entries
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(LocalId::from))
            .collect();
        ids.sort();
        Ok(ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_ragged() {
        assert!(FeatureSequence::new("vid_0001".into(), 2, vec![1.0, f32::NAN]).is_err());
        assert!(FeatureSequence::new("vid_0001".into(), 2, vec![1.0, 2.0, 3.0]).is_err());
        assert!(FeatureSequence::new("vid_0001".into(), 0, vec![]).is_err());
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let cache = FeatureCache::new(dir.path().join("features"));
        let id = LocalId::from("vid_0042");
        assert!(!cache.contains("builtin", &id));
        let f = FeatureSequence::new(id.clone(), 3, (0..12).map(|i| i as f32 * 0.5).collect()).unwrap();
        let stem = cache.store("builtin", &f).unwrap();
        assert_eq!(stem, dir.path().join("features/builtin/vid_0042"));
        assert!(cache.contains("builtin", &id));
        assert!(!cache.contains("other", &id));
        let back = cache.load("builtin", &id).unwrap();
        assert_eq!(back, f);
        assert_eq!((back.steps(), back.dim()), (4, 3));
        assert_eq!(back.row(1), &[1.5, 2.0, 2.5]);
        assert_eq!(cache.ids("builtin").unwrap(), vec![id]);
        assert!(cache.ids("missing").unwrap().is_empty());
    }
}
