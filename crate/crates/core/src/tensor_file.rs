//! Raw tensor files: `<stem>.f32` holds little-endian 32-bit floats in
//! row-major order, `<stem>.json` is a sidecar with shape, dtype and local id.
//! Both files are written to temporaries and renamed into place.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DTYPE_F32: &str = "f32";

#[derive(Debug, Error)]
pub enum TensorFileError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed sidecar {path}: {message}")]
    Sidecar { path: PathBuf, message: String },
    #[error("{path}: expected {expected} values from shape, found {found}")]
    SizeMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sidecar {
    pub shape: Vec<usize>,
    pub dtype: String,
    pub local_id: String,
    /// Frames available before standardization, for frame tensors.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_count: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub sidecar: Sidecar,
    pub data: Vec<f32>,
}

pub fn data_path(stem: &Path) -> PathBuf {
    stem.with_extension("f32")
}

pub fn sidecar_path(stem: &Path) -> PathBuf {
    stem.with_extension("json")
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> TensorFileError + '_ {
    move |source| TensorFileError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)
}

pub fn write(stem: &Path, local_id: &str, shape: &[usize], data: &[f32]) -> Result<(), TensorFileError> {
    write_with(stem, Sidecar {
        shape: shape.to_vec(),
        dtype: DTYPE_F32.to_owned(),
        local_id: local_id.to_owned(),
        native_count: None,
    }, data)
}

pub fn write_with(stem: &Path, sidecar: Sidecar, data: &[f32]) -> Result<(), TensorFileError> {
    let shape = &sidecar.shape;
    let expected: usize = shape.iter().product();
    let dpath = data_path(stem);
    if expected != data.len() {
        return Err(TensorFileError::SizeMismatch {
            path: dpath,
            expected,
            found: data.len(),
        });
    }
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    write_atomic(&dpath, &bytes).map_err(io_err(&dpath))?;

    let spath = sidecar_path(stem);
    let json = serde_json::to_vec_pretty(&sidecar).expect("sidecar serializes");
    write_atomic(&spath, &json).map_err(io_err(&spath))
}

pub fn read(stem: &Path) -> Result<TensorFile, TensorFileError> {
    let spath = sidecar_path(stem);
    let raw = fs::read(&spath).map_err(io_err(&spath))?;
    let sidecar: Sidecar = serde_json::from_slice(&raw).map_err(|e| TensorFileError::Sidecar {
        path: spath.clone(),
        message: e.to_string(),
    })?;
    if sidecar.dtype != DTYPE_F32 {
        return Err(TensorFileError::Sidecar {
            path: spath,
            message: format!("unsupported dtype {:?}", sidecar.dtype),
        });
    }
    let dpath = data_path(stem);
    let bytes = fs::read(&dpath).map_err(io_err(&dpath))?;
    let expected: usize = sidecar.shape.iter().product();
    if bytes.len() != expected * 4 {
        return Err(TensorFileError::SizeMismatch {
            path: dpath,
            expected,
            found: bytes.len() / 4,
        });
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(TensorFile { sidecar, data })
}
