//! Two-layer perceptron with softmax cross-entropy and hand-written backprop.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `logits = W2·relu(W1·x + b1) + b2`.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel<T> {
    w1: Array2<T>,
    b1: Array1<T>,
    w2: Array2<T>,
    b2: Array1<T>,
}

/// Parameter-shaped gradients (or any parameter-shaped update).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub w1: Array2<T>,
    pub b1: Array1<T>,
    pub w2: Array2<T>,
    pub b2: Array1<T>,
}

impl<T: Scalar> Gradients<T> {
    pub fn zeros_like(model: &MlpModel<T>) -> Self {
        Gradients {
            w1: Array2::zeros(model.w1.raw_dim()),
            b1: Array1::zeros(model.b1.raw_dim()),
            w2: Array2::zeros(model.w2.raw_dim()),
            b2: Array1::zeros(model.b2.raw_dim()),
        }
    }

    /// Flattened in the order `w1, b1, w2, b2`, each row-major.
    pub fn to_flat(&self) -> Vec<T> {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .copied()
            .collect()
    }
}

/// Reusable activations for one batch size.
#[derive(Debug)]
pub(crate) struct Scratch<T> {
    hidden: Array2<T>,
    logits: Array2<T>,
    dhidden: Array2<T>,
}

impl<T: Scalar> Scratch<T> {
    pub(crate) fn new() -> Self {
        Scratch {
            hidden: Array2::zeros((0, 0)),
            logits: Array2::zeros((0, 0)),
            dhidden: Array2::zeros((0, 0)),
        }
    }

    fn fit(&mut self, batch: usize, hidden: usize, classes: usize) {
        if self.hidden.dim() != (batch, hidden) {
            self.hidden = Array2::zeros((batch, hidden));
            self.dhidden = Array2::zeros((batch, hidden));
        }
        if self.logits.dim() != (batch, classes) {
            self.logits = Array2::zeros((batch, classes));
        }
    }
}

fn he_normal<T: Scalar, R: Rng + ?Sized>(rows: usize, fan_in: usize, rng: &mut R) -> Array2<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let mut w = Array2::zeros((rows, fan_in));
    for v in w.iter_mut() {
        let z: f64 = StandardNormal.sample(rng);
        *v = T::of(z * std);
    }
    w
}

/// Row-wise softmax.
pub fn softmax<T: Scalar>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut out = logits.to_owned();
    for mut row in out.rows_mut() {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        row.mapv_inplace(|z| (z - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|e| e / sum);
    }
    out
}

impl<T: Scalar> MlpModel<T> {
    /// He-normal weights (`std = √(2/fan_in)`), zero biases.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            input_dim >= 1 && hidden_dim >= 1 && num_classes >= 1,
            "model dimensions must be positive"
        );
        let w1 = he_normal(hidden_dim, input_dim, rng);
        let w2 = he_normal(num_classes, hidden_dim, rng);
        MlpModel {
            w1,
            b1: Array1::zeros(hidden_dim),
            w2,
            b2: Array1::zeros(num_classes),
        }
    }

    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        MlpModel {
            w1: Array2::zeros((hidden_dim, input_dim)),
            b1: Array1::zeros(hidden_dim),
            w2: Array2::zeros((num_classes, hidden_dim)),
            b2: Array1::zeros(num_classes),
        }
    }

    /// Assembles a model from `w1: hidden×input`, `b1: hidden`, `w2: classes×hidden`, `b2: classes`.
    pub fn from_parts(w1: Array2<T>, b1: Array1<T>, w2: Array2<T>, b2: Array1<T>) -> Result<Self> {
        let (h, i) = w1.dim();
        let (k, h2) = w2.dim();
        if i == 0 || h == 0 || k == 0 || b1.len() != h || h2 != h || b2.len() != k {
            return Err(Error::Shape(format!(
                "inconsistent MLP parts: w1 {:?}, b1 {}, w2 {:?}, b2 {}",
                w1.dim(),
                b1.len(),
                w2.dim(),
                b2.len()
            )));
        }
        Ok(MlpModel { w1, b1, w2, b2 })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.nrows()
    }

    pub fn w1(&self) -> &Array2<T> {
        &self.w1
    }

    pub fn b1(&self) -> &Array1<T> {
        &self.b1
    }

    pub fn w2(&self) -> &Array2<T> {
        &self.w2
    }

    pub fn b2(&self) -> &Array1<T> {
        &self.b2
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// Storage for all parameters at this model's precision.
    pub fn param_bytes(&self) -> usize {
        self.param_count() * std::mem::size_of::<T>()
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .all(|v| v.is_finite())
    }

    /// Flattened in the order `w1, b1, w2, b2`, each row-major.
    pub fn to_flat(&self) -> Vec<T> {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .chain(&self.b2)
            .copied()
            .collect()
    }

    pub fn set_flat(&mut self, values: &[T]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                actual: values.len(),
            });
        }
        let params = self
            .w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut());
        for (p, &v) in params.zip(values) {
            *p = v;
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> MlpModel<U> {
        let c = |x: &T| U::of(x.as_f64());
        MlpModel {
            w1: self.w1.map(c),
            b1: self.b1.map(c),
            w2: self.w2.map(c),
            b2: self.b2.map(c),
        }
    }

    fn check_input(&self, x: &ArrayView2<'_, T>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    fn forward_into(&self, x: &ArrayView2<'_, T>, hidden: &mut Array2<T>, logits: &mut Array2<T>) {
        general_mat_mul(T::one(), x, &self.w1.t(), T::zero(), hidden);
        Zip::from(hidden.rows_mut()).for_each(|mut row| {
            Zip::from(&mut row)
                .and(&self.b1)
                .for_each(|h, &b| *h = (*h + b).max(T::zero()));
        });
        general_mat_mul(T::one(), &*hidden, &self.w2.t(), T::zero(), logits);
        logits
            .rows_mut()
            .into_iter()
            .for_each(|mut row| row += &self.b2);
    }

    /// Logits for a `batch × input_dim` matrix.
    pub fn forward(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        self.check_input(&x)?;
        let mut hidden = Array2::zeros((x.nrows(), self.hidden_dim()));
        let mut logits = Array2::zeros((x.nrows(), self.num_classes()));
        self.forward_into(&x, &mut hidden, &mut logits);
        Ok(logits)
    }

    /// Mean softmax cross-entropy against per-row target distributions, with
    /// exact gradients.
    pub fn loss_and_grad(
        &self,
        x: ArrayView2<'_, T>,
        targets: ArrayView2<'_, T>,
    ) -> Result<(T, Gradients<T>)> {
        let mut grads = Gradients::zeros_like(self);
        let mut scratch = Scratch::new();
        let loss = self.loss_and_grad_into(x, targets, &mut scratch, &mut grads)?;
        Ok((loss, grads))
    }

    pub(crate) fn loss_and_grad_into(
        &self,
        x: ArrayView2<'_, T>,
        targets: ArrayView2<'_, T>,
        scratch: &mut Scratch<T>,
        grads: &mut Gradients<T>,
    ) -> Result<T> {
        self.check_input(&x)?;
        let b = x.nrows();
        if targets.dim() != (b, self.num_classes()) {
            return Err(Error::Shape(format!(
                "targets are {:?}, expected ({b}, {})",
                targets.dim(),
                self.num_classes()
            )));
        }
        if b == 0 {
            return Err(Error::Empty("batch"));
        }
        scratch.fit(b, self.hidden_dim(), self.num_classes());
        let Scratch {
            hidden,
            logits,
            dhidden,
        } = scratch;
        self.forward_into(&x, hidden, logits);

        // logits become dL/dlogits = (softmax - target) / b
        let inv_b = T::one() / T::of(b as f64);
        let mut loss = T::zero();
        for (mut z, t) in logits.rows_mut().into_iter().zip(targets.rows()) {
            let max = z.iter().copied().fold(T::neg_infinity(), T::max);
            let sum = z.iter().fold(T::zero(), |s, &v| s + (v - max).exp());
            let lse = max + sum.ln();
            for (zk, &tk) in z.iter_mut().zip(t) {
                loss -= tk * (*zk - lse);
                *zk = ((*zk - lse).exp() - tk) * inv_b;
            }
        }
        let loss = loss * inv_b;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                loss: loss.as_f64(),
            });
        }

        general_mat_mul(T::one(), &logits.t(), &*hidden, T::zero(), &mut grads.w2);
        grads.b2.assign(&logits.sum_axis(Axis(0)));
        general_mat_mul(T::one(), &*logits, &self.w2, T::zero(), dhidden);
        Zip::from(&mut *dhidden).and(&*hidden).for_each(|d, &h| {
            if h <= T::zero() {
                *d = T::zero();
            }
        });
        general_mat_mul(T::one(), &dhidden.t(), &x, T::zero(), &mut grads.w1);
        grads.b1.assign(&dhidden.sum_axis(Axis(0)));
        Ok(loss)
    }

    /// `θ ← θ − lr·g`.
    pub fn sgd_step(&mut self, grads: &Gradients<T>, lr: T) {
        self.w1.scaled_add(-lr, &grads.w1);
        self.b1.scaled_add(-lr, &grads.b1);
        self.w2.scaled_add(-lr, &grads.w2);
        self.b2.scaled_add(-lr, &grads.b2);
    }

    /// Argmax class per row, restricted to `allowed[k] == true` when given.
    /// Ties go to the lowest class index.
    pub fn predict(&self, x: ArrayView2<'_, T>, allowed: Option<&[bool]>) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok(logits
            .rows()
            .into_iter()
            .map(|row| {
                let mut best: Option<(usize, T)> = None;
                for (k, &z) in row.iter().enumerate() {
                    if allowed.is_some_and(|a| !a.get(k).copied().unwrap_or(false)) {
                        continue;
                    }
                    if best.is_none_or(|(_, bz)| z > bz) {
                        best = Some((k, z));
                    }
                }
                best.map_or(0, |(k, _)| k)
            })
            .collect())
    }
}
