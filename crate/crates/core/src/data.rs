//! Datasets: MNIST from IDX files and a synthetic quadrant corpus.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::types::{ClassId, ImageShape, ImageU8, Instance, Payload};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

pub const MNIST_TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const MNIST_TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const MNIST_TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const MNIST_TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub train: Vec<Instance>,
    pub test: Vec<Instance>,
    pub shape: ImageShape,
    pub num_classes: usize,
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn need(path: &Path, bytes: &[u8], expected: usize) -> Result<()> {
    if bytes.len() < expected {
        return Err(Error::IdxTruncated {
            path: path.to_path_buf(),
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

fn check_magic(path: &Path, bytes: &[u8], expected: u32) -> Result<()> {
    need(path, bytes, 4)?;
    let found = be_u32(bytes, 0);
    if found != expected {
        return Err(Error::IdxMagic {
            path: path.to_path_buf(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an IDX3 image file into `(count, shape, pixels)`.
pub fn parse_idx_images(path: &Path, bytes: &[u8]) -> Result<(usize, ImageShape, Vec<u8>)> {
    check_magic(path, bytes, IDX_IMAGES_MAGIC)?;
    need(path, bytes, 16)?;
    let n = be_u32(bytes, 4) as usize;
    let shape = ImageShape::new(be_u32(bytes, 8) as usize, be_u32(bytes, 12) as usize, 1);
    need(path, bytes, 16 + n * shape.len())?;
    Ok((n, shape, bytes[16..16 + n * shape.len()].to_vec()))
}

/// Parses an IDX1 label file.
pub fn parse_idx_labels(path: &Path, bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(path, bytes, IDX_LABELS_MAGIC)?;
    need(path, bytes, 8)?;
    let n = be_u32(bytes, 4) as usize;
    need(path, bytes, 8 + n)?;
    Ok(bytes[8..8 + n].to_vec())
}

/// Loads paired IDX image/label files; instance ids are `0..n` in file order.
pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(Vec<Instance>, ImageShape)> {
    let (ip, lp) = (images_path.as_ref(), labels_path.as_ref());
    let (n, shape, pixels) = parse_idx_images(ip, &read(ip)?)?;
    let labels = parse_idx_labels(lp, &read(lp)?)?;
    if labels.len() != n {
        return Err(Error::IdxCountMismatch {
            images: n,
            labels: labels.len(),
        });
    }
    let instances = pixels
        .chunks_exact(shape.len().max(1))
        .zip(&labels)
        .enumerate()
        .map(|(i, (px, &label))| {
            Instance::new(
                i as u64,
                ClassId(u32::from(label)),
                Payload::image(shape, px.to_vec())?,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((instances, shape))
}

pub fn encode_idx_images(images: &[&ImageU8]) -> Result<Vec<u8>> {
    let shape = images
        .first()
        .map_or(ImageShape::new(0, 0, 1), |i| i.shape());
    if images.iter().any(|i| i.shape() != shape) || shape.channels != 1 {
        return Err(Error::Shape(
            "IDX images must share one single-channel shape".into(),
        ));
    }
    let mut out = Vec::with_capacity(16 + images.len() * shape.len());
    for v in [
        IDX_IMAGES_MAGIC,
        images.len() as u32,
        shape.height as u32,
        shape.width as u32,
    ] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        out.extend_from_slice(img.data());
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

/// Writes single-channel image instances as an IDX image/label file pair.
pub fn write_idx(
    instances: &[Instance],
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    let images: Vec<&ImageU8> = instances
        .iter()
        .map(|i| {
            i.payload()
                .as_image()
                .ok_or_else(|| Error::Shape("IDX holds images only".into()))
        })
        .collect::<Result<_>>()?;
    let labels: Vec<u8> = instances
        .iter()
        .map(|i| {
            u8::try_from(i.class().0)
                .map_err(|_| Error::Shape(format!("label {} exceeds u8", i.class())))
        })
        .collect::<Result<_>>()?;
    for (path, bytes) in [
        (images_path.as_ref(), encode_idx_images(&images)?),
        (labels_path.as_ref(), encode_idx_labels(&labels)),
    ] {
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn num_classes(instances: &[Instance]) -> usize {
    instances
        .iter()
        .map(|i| i.class().index() + 1)
        .max()
        .unwrap_or(0)
}

impl Dataset {
    /// Loads the four standard MNIST files from `dir`. Test ids continue after
    /// the training ids so every instance id is unique.
    pub fn mnist(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let p = |name: &str| -> PathBuf { dir.join(name) };
        let (train, shape) = load_mnist_idx(p(MNIST_TRAIN_IMAGES), p(MNIST_TRAIN_LABELS))?;
        let (test, test_shape) = load_mnist_idx(p(MNIST_TEST_IMAGES), p(MNIST_TEST_LABELS))?;
        if test_shape != shape {
            return Err(Error::Shape(format!(
                "train images are {shape}, test images {test_shape}"
            )));
        }
        let offset = train.len() as u64;
        let test = test
            .into_iter()
            .map(|i| Instance::new(offset + i.id(), i.class(), i.payload().clone()))
            .collect::<Result<Vec<_>>>()?;
        let num_classes = num_classes(&train).max(num_classes(&test));
        Ok(Dataset {
            name: "mnist".into(),
            train,
            test,
            shape,
            num_classes,
        })
    }

    /// Subset of `test` whose labels are in `classes`.
    pub fn test_subset(&self, classes: &[ClassId]) -> Vec<Instance> {
        self.test
            .iter()
            .filter(|i| classes.contains(&i.class()))
            .cloned()
            .collect()
    }
}

pub const QUADRANT_BACKGROUND: u8 = 32;
pub const QUADRANT_FOREGROUND: u8 = 224;

/// Four classes of `size × size` grey images; class `k` lights up quadrant `k`
/// (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right) on a dark
/// background, plus Gaussian pixel noise. The first 4/5 of each class go to
/// the training split.
pub fn make_synthetic_quadrants(
    n_per_class: usize,
    size: usize,
    noise_std: f64,
    rng: &mut SeededRng,
) -> Result<Dataset> {
    if size < 4 || !size.is_multiple_of(2) {
        return Err(Error::Shape(format!(
            "synthetic image size must be even and at least 4, got {size}"
        )));
    }
    if !(noise_std >= 0.0 && noise_std.is_finite()) {
        return Err(Error::Shape(format!(
            "noise_std must be a non-negative number, got {noise_std}"
        )));
    }
    let shape = ImageShape::new(size, size, 1);
    let half = size / 2;
    let noise = Normal::new(0.0, noise_std).expect("validated std");
    let n_train = n_per_class * 4 / 5;
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut id = 0u64;
    for j in 0..n_per_class {
        for k in 0..4u32 {
            let (qy, qx) = ((k as usize / 2) * half, (k as usize % 2) * half);
            let mut data = Vec::with_capacity(size * size);
            for y in 0..size {
                for x in 0..size {
                    let inside = (qy..qy + half).contains(&y) && (qx..qx + half).contains(&x);
                    let base = if inside {
                        QUADRANT_FOREGROUND
                    } else {
                        QUADRANT_BACKGROUND
                    };
                    let v = if noise_std > 0.0 {
                        f64::from(base) + noise.sample(rng)
                    } else {
                        f64::from(base)
                    };
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
            let inst = Instance::new(id, ClassId(k), Payload::image(shape, data)?)?;
            id += 1;
            if j < n_train {
                train.push(inst);
            } else {
                test.push(inst);
            }
        }
    }
    Ok(Dataset {
        name: "synthetic-quadrants".into(),
        train,
        test,
        shape,
        num_classes: 4,
    })
}
