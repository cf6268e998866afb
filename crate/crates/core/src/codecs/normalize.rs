use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{Instance, Payload};

pub const MIN_STD: f32 = 1e-6;

/// Per-channel standardisation of learner inputs.
///
/// Images are first scaled to `[0, 1]` (`/255`); vectors are taken as-is and
/// form a single channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    mean: Vec<f32>,
    std: Vec<f32>,
    dim: usize,
}

#[inline]
fn element(p: &Payload, i: usize) -> f64 {
    match p {
        Payload::Image(img) => f64::from(img.data()[i]) / 255.0,
        Payload::Vector(v) => f64::from(v[i]),
    }
}

fn channels(p: &Payload) -> usize {
    p.image_shape().map_or(1, |s| s.channels)
}

impl Normalizer {
    /// Population mean and standard deviation per channel over every element
    /// of every instance.
    pub fn fit<'a, I>(instances: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a Instance>,
    {
        let mut iter = instances.into_iter();
        let first = iter.next().ok_or(Error::Empty("normalizer input"))?;
        let kind = first.payload().kind();
        let shape = first.payload().image_shape();
        let dim = first.payload().len();
        let c = channels(first.payload());
        let mut sum = vec![0.0f64; c];
        let mut sq = vec![0.0f64; c];
        let mut count = vec![0u64; c];
        for inst in std::iter::once(first).chain(iter) {
            let p = inst.payload();
            if p.kind() != kind || p.image_shape() != shape || p.len() != dim {
                return Err(Error::Heterogeneous(format!(
                    "instance {} is {} of length {}, expected {kind} of length {dim}",
                    inst.id(),
                    p.kind(),
                    p.len()
                )));
            }
            for i in 0..dim {
                let v = element(p, i);
                sum[i % c] += v;
                sq[i % c] += v * v;
                count[i % c] += 1;
            }
        }
        let mut mean = Vec::with_capacity(c);
        let mut std = Vec::with_capacity(c);
        for ch in 0..c {
            let n = count[ch] as f64;
            let m = sum[ch] / n;
            let var = (sq[ch] / n - m * m).max(0.0);
            mean.push(m as f32);
            std.push((var.sqrt() as f32).max(MIN_STD));
        }
        Ok(Normalizer { mean, std, dim })
    }

    pub fn mean(&self) -> &[f32] {
        &self.mean
    }

    pub fn std(&self) -> &[f32] {
        &self.std
    }

    /// Input dimension this normalizer was fit on.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the standardised payload into `out`.
    pub fn apply_into<T: Scalar>(&self, p: &Payload, out: &mut [T]) -> Result<()> {
        if p.len() != self.dim || out.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: p.len(),
            });
        }
        let c = self.mean.len();
        if channels(p) != c {
            return Err(Error::Heterogeneous(format!(
                "payload has {} channels, normalizer {c}",
                channels(p)
            )));
        }
        for (i, o) in out.iter_mut().enumerate() {
            let ch = i % c;
            let v = (element(p, i) as f32 - self.mean[ch]) / self.std[ch];
            *o = T::of(f64::from(v));
        }
        Ok(())
    }

    /// Stacks standardised payloads into an `instances × dim` matrix.
    pub fn features<'a, T, I>(&self, instances: I) -> Result<Array2<T>>
    where
        T: Scalar,
        I: IntoIterator<Item = &'a Instance>,
        I::IntoIter: ExactSizeIterator,
    {
        let iter = instances.into_iter();
        let mut x = Array2::<T>::zeros((iter.len(), self.dim));
        for (mut row, inst) in x.rows_mut().into_iter().zip(iter) {
            self.apply_into(inst.payload(), row.as_slice_mut().expect("standard layout"))?;
        }
        Ok(x)
    }
}

pub fn fit_normalizer(instances: &[Instance]) -> Result<Normalizer> {
    Normalizer::fit(instances)
}
