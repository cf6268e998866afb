//! Precomputed latents supplied by an external encoder.
//!
//! A manifest directory holds `manifest.csv` with header `id,file,kind,dims`.
//! `kind` is `vec_f32` (raw little-endian `f32`, `dims` = length) or
//! `image_u8` (raw bytes, `dims` = `HxWxC` or `HxW`). `file` is relative to
//! the directory.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ImageShape, Payload};

pub const MANIFEST_FILE: &str = "manifest.csv";

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    id: u64,
    file: String,
    kind: String,
    dims: String,
}

#[derive(Clone, Debug)]
pub struct ExternalManifest {
    dir: PathBuf,
    entries: HashMap<u64, Payload>,
}

fn manifest_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Manifest {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_dims(path: &Path, kind: &str, dims: &str) -> Result<Vec<usize>> {
    let parts: Result<Vec<usize>> = dims
        .split('x')
        .map(|d| {
            d.trim()
                .parse::<usize>()
                .ok()
                .filter(|&v| v > 0)
                .ok_or_else(|| manifest_err(path, format!("bad dims {dims:?} for {kind}")))
        })
        .collect();
    let parts = parts?;
    let ok = match kind {
        "vec_f32" => parts.len() == 1,
        "image_u8" => parts.len() == 2 || parts.len() == 3,
        other => return Err(manifest_err(path, format!("unknown kind {other:?}"))),
    };
    if !ok {
        return Err(manifest_err(path, format!("bad dims {dims:?} for {kind}")));
    }
    Ok(parts)
}

impl ExternalManifest {
    /// Loads every payload listed in `<dir>/manifest.csv`. `path` may name the
    /// directory or the csv file itself.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let (dir, csv_path) = if path.is_dir() {
            (path.to_path_buf(), path.join(MANIFEST_FILE))
        } else {
            (
                path.parent().unwrap_or(Path::new(".")).to_path_buf(),
                path.to_path_buf(),
            )
        };
        let mut reader = csv::Reader::from_path(&csv_path)
            .map_err(|e| manifest_err(&csv_path, e.to_string()))?;
        let headers = reader.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["id", "file", "kind", "dims"] {
            return Err(manifest_err(
                &csv_path,
                format!("header must be id,file,kind,dims, found {headers:?}"),
            ));
        }
        let mut entries = HashMap::new();
        for row in reader.deserialize::<Row>() {
            let row = row?;
            let dims = parse_dims(&csv_path, &row.kind, &row.dims)?;
            let file = dir.join(&row.file);
            let bytes = fs::read(&file).map_err(|e| Error::io(&file, e))?;
            let payload = match row.kind.as_str() {
                "vec_f32" => {
                    if bytes.len() != dims[0] * 4 {
                        return Err(manifest_err(
                            &file,
                            format!(
                                "expected {} bytes for {} f32 values, found {}",
                                dims[0] * 4,
                                dims[0],
                                bytes.len()
                            ),
                        ));
                    }
                    Payload::Vector(
                        bytes
                            .chunks_exact(4)
                            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                            .collect(),
                    )
                }
                _ => {
                    let shape =
                        ImageShape::new(dims[0], dims[1], dims.get(2).copied().unwrap_or(1));
                    if bytes.len() != shape.len() {
                        return Err(manifest_err(
                            &file,
                            format!(
                                "expected {} bytes for a {shape} image, found {}",
                                shape.len(),
                                bytes.len()
                            ),
                        ));
                    }
                    Payload::image(shape, bytes)?
                }
            };
            if entries.insert(row.id, payload).is_some() {
                return Err(manifest_err(&csv_path, format!("duplicate id {}", row.id)));
            }
        }
        Ok(ExternalManifest { dir, entries })
    }

    /// Writes `entries` as a manifest directory (one payload file per id).
    pub fn write(dir: impl AsRef<Path>, entries: &[(u64, Payload)]) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv_path = dir.join(MANIFEST_FILE);
        let mut w = csv::Writer::from_path(&csv_path)?;
        for (id, payload) in entries {
            let (file, kind, dims, bytes) = match payload {
                Payload::Vector(v) => (
                    format!("{id}.f32"),
                    "vec_f32",
                    v.len().to_string(),
                    v.iter().flat_map(|x| x.to_le_bytes()).collect::<Vec<u8>>(),
                ),
                Payload::Image(img) => {
                    let s = img.shape();
                    (
                        format!("{id}.u8"),
                        "image_u8",
                        format!("{}x{}x{}", s.height, s.width, s.channels),
                        img.data().to_vec(),
                    )
                }
            };
            let path = dir.join(&file);
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
            w.serialize(Row {
                id: *id,
                file,
                kind: kind.to_string(),
                dims,
            })?;
        }
        w.flush().map_err(|e| Error::io(&csv_path, e))?;
        Ok(())
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u64) -> Result<&Payload> {
        self.entries.get(&id).ok_or(Error::MissingLatent { id })
    }

    /// Element count and payload kind shared by every entry, if uniform.
    pub fn uniform_payload(&self) -> Option<&Payload> {
        let mut it = self.entries.values();
        let first = it.next()?;
        it.all(|p| {
            p.kind() == first.kind()
                && p.len() == first.len()
                && p.image_shape() == first.image_shape()
        })
        .then_some(first)
    }
}
