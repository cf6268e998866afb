//! Instance compression applied before storage.

mod external;
mod normalize;
mod projection;
mod resize;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ndarray::Array2;

pub use external::{ExternalManifest, MANIFEST_FILE};
pub use normalize::{fit_normalizer, Normalizer, MIN_STD};
pub use projection::{make_projection, ProjectionMatrix, ORTHONORMAL_TOL};
pub use resize::resize_bilinear;

use crate::error::{Error, Result};
use crate::types::{payload_bytes, ImageShape, ImageU8, Instance, Payload};
use crate::Projection;

/// Row-major `(h, w, c)` flattening scaled to `[0, 1]`.
pub fn vectorize(img: &ImageU8) -> Vec<f32> {
    img.data().iter().map(|&b| f32::from(b) / 255.0).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CodecSpec {
    Identity,
    Resize {
        height: usize,
        width: usize,
    },
    /// Semi-orthogonal projection to `dim` values, drawn from `seed`.
    RandomProjection {
        dim: usize,
        seed: u64,
    },
    External {
        manifest: PathBuf,
    },
}

impl CodecSpec {
    /// Rebinds the projection seed; other codecs are unchanged.
    pub fn with_seed(self, seed: u64) -> Self {
        match self {
            CodecSpec::RandomProjection { dim, .. } => CodecSpec::RandomProjection { dim, seed },
            other => other,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            CodecSpec::Identity => "identity",
            CodecSpec::Resize { .. } => "resize",
            CodecSpec::RandomProjection { .. } => "rp",
            CodecSpec::External { .. } => "external",
        }
    }
}

/// Textual form accepted by [`FromStr`]; the projection seed is not part of it.
impl fmt::Display for CodecSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CodecSpec::Identity => write!(f, "identity"),
            CodecSpec::Resize { height, width } => write!(f, "resize:{height}x{width}"),
            CodecSpec::RandomProjection { dim, .. } => write!(f, "rp:{dim}"),
            CodecSpec::External { manifest } => write!(f, "external:{}", manifest.display()),
        }
    }
}

fn positive(s: &str) -> Option<usize> {
    if s.is_empty() || !s.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    s.parse().ok().filter(|&v| v > 0)
}

impl FromStr for CodecSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let bad = || Error::ParseCodec(text.to_string());
        let t = text.trim();
        if t == "identity" {
            return Ok(CodecSpec::Identity);
        }
        let (head, arg) = t.split_once(':').ok_or_else(bad)?;
        match head {
            "resize" => {
                let (h, w) = arg.split_once('x').ok_or_else(bad)?;
                Ok(CodecSpec::Resize {
                    height: positive(h).ok_or_else(bad)?,
                    width: positive(w).ok_or_else(bad)?,
                })
            }
            "rp" => Ok(CodecSpec::RandomProjection {
                dim: positive(arg).ok_or_else(bad)?,
                seed: 0,
            }),
            "external" if !arg.is_empty() => Ok(CodecSpec::External {
                manifest: PathBuf::from(arg),
            }),
            _ => Err(bad()),
        }
    }
}

/// A [`CodecSpec`] made ready for one run: the projection matrix is drawn and
/// external manifests are loaded once.
#[derive(Clone, Debug)]
pub enum Codec {
    Identity {
        input: ImageShape,
    },
    Resize {
        input: ImageShape,
        height: usize,
        width: usize,
    },
    RandomProjection {
        input: ImageShape,
        q: Projection,
    },
    External {
        manifest: ExternalManifest,
    },
}

fn expect_image<'a>(codec: &CodecSpec, inst: &'a Instance) -> Result<&'a ImageU8> {
    inst.payload().as_image().ok_or_else(|| Error::NotAnImage {
        codec: codec.to_string(),
    })
}

impl Codec {
    pub fn prepare(spec: &CodecSpec, input: ImageShape) -> Result<Self> {
        if input.is_empty() {
            return Err(Error::Shape(format!("empty input shape {input}")));
        }
        match spec {
            CodecSpec::Identity => Ok(Codec::Identity { input }),
            &CodecSpec::Resize { height, width } => {
                if height == 0 || width == 0 {
                    return Err(Error::Shape(format!(
                        "resize target {height}x{width} must be at least 1x1"
                    )));
                }
                Ok(Codec::Resize {
                    input,
                    height,
                    width,
                })
            }
            &CodecSpec::RandomProjection { dim, seed } => Ok(Codec::RandomProjection {
                input,
                q: Projection::random(input.len(), dim, seed)?,
            }),
            CodecSpec::External { manifest } => {
                let manifest = ExternalManifest::load(manifest)?;
                if manifest.is_empty() {
                    return Err(Error::Manifest {
                        path: manifest.dir().to_path_buf(),
                        message: "no entries".into(),
                    });
                }
                if manifest.uniform_payload().is_none() {
                    return Err(Error::Manifest {
                        path: manifest.dir().to_path_buf(),
                        message: "entries must share one kind and shape".into(),
                    });
                }
                Ok(Codec::External { manifest })
            }
        }
    }

    pub fn spec(&self) -> CodecSpec {
        match self {
            Codec::Identity { .. } => CodecSpec::Identity,
            &Codec::Resize { height, width, .. } => CodecSpec::Resize { height, width },
            Codec::RandomProjection { q, .. } => CodecSpec::RandomProjection {
                dim: q.rows(),
                seed: 0,
            },
            Codec::External { manifest } => CodecSpec::External {
                manifest: manifest.dir().to_path_buf(),
            },
        }
    }

    /// Stored size of every encoded instance.
    pub fn output_bytes(&self) -> usize {
        match self {
            Codec::Identity { input } => input.len(),
            Codec::Resize {
                input,
                height,
                width,
            } => height * width * input.channels,
            Codec::RandomProjection { q, .. } => q.rows() * std::mem::size_of::<f32>(),
            Codec::External { manifest } => manifest.uniform_payload().map_or(0, payload_bytes),
        }
    }

    /// Image shape of encoded payloads, `None` for vectors.
    pub fn output_shape(&self) -> Option<ImageShape> {
        match self {
            Codec::Identity { input } => Some(*input),
            Codec::Resize {
                input,
                height,
                width,
            } => Some(ImageShape::new(*height, *width, input.channels)),
            Codec::RandomProjection { .. } => None,
            Codec::External { manifest } => {
                manifest.uniform_payload().and_then(Payload::image_shape)
            }
        }
    }

    pub fn encode(&self, inst: &Instance) -> Result<Instance> {
        match self {
            Codec::Identity { .. } => Ok(inst.clone()),
            &Codec::Resize { height, width, .. } => {
                let img = expect_image(&self.spec(), inst)?;
                inst.with_payload(Payload::Image(resize_bilinear(img, height, width)?))
            }
            Codec::RandomProjection { q, .. } => {
                let img = expect_image(&self.spec(), inst)?;
                inst.with_payload(Payload::Vector(q.project(&vectorize(img))?))
            }
            Codec::External { manifest } => inst.with_payload(manifest.get(inst.id())?.clone()),
        }
    }

    /// Encodes a slice; projections are applied as one matrix product per chunk.
    pub fn encode_all(&self, instances: &[Instance]) -> Result<Vec<Instance>> {
        let Codec::RandomProjection { q, .. } = self else {
            return instances.iter().map(|i| self.encode(i)).collect();
        };
        const CHUNK: usize = 1024;
        let mut out = Vec::with_capacity(instances.len());
        for chunk in instances.chunks(CHUNK) {
            let mut x = Array2::<f32>::zeros((chunk.len(), q.cols()));
            for (mut row, inst) in x.rows_mut().into_iter().zip(chunk) {
                let img = expect_image(&self.spec(), inst)?;
                if img.data().len() != q.cols() {
                    return Err(Error::DimensionMismatch {
                        expected: q.cols(),
                        actual: img.data().len(),
                    });
                }
                row.iter_mut()
                    .zip(img.data())
                    .for_each(|(o, &b)| *o = f32::from(b) / 255.0);
            }
            let y = q.project_rows(x.view())?;
            for (row, inst) in y.rows().into_iter().zip(chunk) {
                out.push(inst.with_payload(Payload::Vector(row.to_vec()))?);
            }
        }
        Ok(out)
    }
}

/// One-shot encode. Use [`Codec::prepare`] to reuse a projection or manifest.
pub fn encode(spec: &CodecSpec, inst: &Instance) -> Result<Instance> {
    let input = match inst.payload() {
        Payload::Image(img) => img.shape(),
        Payload::Vector(v) => match spec {
            CodecSpec::Identity | CodecSpec::External { .. } => ImageShape::new(1, v.len(), 1),
            _ => {
                return Err(Error::NotAnImage {
                    codec: spec.to_string(),
                })
            }
        },
    };
    Codec::prepare(spec, input)?.encode(inst)
}
