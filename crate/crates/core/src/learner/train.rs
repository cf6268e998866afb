//! Training from scratch on a buffer snapshot, and evaluation.

use ndarray::{s, Array2};
use rand::seq::SliceRandom;

use super::cutmix::cutmix_apply;
use super::mlp::{Gradients, MlpModel, Scratch};
use super::schedule::{is_cycle_end, sgdr_lr, TrainConfig};
use crate::codecs::Normalizer;
use crate::error::{Error, Result};
use crate::rng::SeededRng;
use crate::scalar::Scalar;
use crate::types::{ClassId, Instance};

#[derive(Clone, Debug)]
pub struct TrainOutcome<T> {
    /// Parameters of the epoch with the lowest mean training loss.
    pub model: MlpModel<T>,
    pub best_loss: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stopped_early: bool,
}

/// Trains a freshly initialised model on `snapshot` only.
///
/// Mini-batch SGD over shuffled epochs with the warm-restart cosine schedule.
/// Stops once `patience_cycles` complete cosine cycles pass without a new
/// best epoch-mean loss, or at `max_epochs`. Cutmix is used only when enabled
/// and the payloads are images. Random streams are forked from `rng` as
/// `init`, `shuffle` and `cutmix`.
pub fn train_on_buffer<T: Scalar>(
    snapshot: &[(ClassId, Instance)],
    normalizer: &Normalizer,
    cfg: &TrainConfig,
    num_classes: usize,
    rng: &SeededRng,
) -> Result<TrainOutcome<T>> {
    cfg.validate()?;
    if snapshot.is_empty() {
        return Err(Error::Empty("training buffer"));
    }
    if let Some((c, _)) = snapshot.iter().find(|(c, _)| c.index() >= num_classes) {
        return Err(Error::Shape(format!(
            "class {c} outside the {num_classes}-way output"
        )));
    }
    let image_shape = snapshot[0].1.payload().image_shape();
    let features: Array2<T> = normalizer.features(snapshot.iter().map(|(_, i)| i))?;
    let labels: Vec<usize> = snapshot.iter().map(|(c, _)| c.index()).collect();
    let n = labels.len();
    let dim = features.ncols();

    let mut init_rng = rng.fork("init");
    let mut shuffle_rng = rng.fork("shuffle");
    let mut cutmix_rng = rng.fork("cutmix");
    let mut model = MlpModel::<T>::init(dim, cfg.hidden_dim, num_classes, &mut init_rng);
    let mut grads = Gradients::zeros_like(&model);
    let mut scratch = Scratch::new();

    let bs = cfg.batch_size.min(n);
    let steps_per_epoch = n.div_ceil(bs);
    let use_cutmix = cfg.cutmix_enabled && image_shape.is_some();
    let mut x = Array2::<T>::zeros((bs, dim));
    let mut t = Array2::<T>::zeros((bs, num_classes));
    let mut order: Vec<usize> = (0..n).collect();

    let mut best = (f64::INFINITY, 0usize, model.clone());
    let mut improved_this_cycle = false;
    let mut stale_cycles = 0;
    let mut step = 0usize;
    let mut epochs_run = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0f64;
        for chunk in order.chunks(bs) {
            let b = chunk.len();
            let mut xb = x.slice_mut(s![..b, ..]);
            let mut tb = t.slice_mut(s![..b, ..]);
            tb.fill(T::zero());
            for (r, &i) in chunk.iter().enumerate() {
                xb.row_mut(r).assign(&features.row(i));
                tb[[r, labels[i]]] = T::one();
            }
            if use_cutmix {
                cutmix_apply(
                    xb.view_mut(),
                    tb.view_mut(),
                    image_shape,
                    cfg.cutmix_p,
                    cfg.cutmix_alpha,
                    &mut cutmix_rng,
                )?;
            }
            let lr = sgdr_lr(step, steps_per_epoch, cfg);
            let loss =
                match model.loss_and_grad_into(xb.view(), tb.view(), &mut scratch, &mut grads) {
                    Ok(l) => l,
                    Err(Error::NonFiniteLoss { loss }) => {
                        return Err(Error::Diverged {
                            epoch,
                            step,
                            lr,
                            loss,
                        });
                    }
                    Err(e) => return Err(e),
                };
            model.sgd_step(&grads, T::of(lr));
            total += loss.as_f64() * b as f64;
            step += 1;
        }
        epochs_run = epoch + 1;
        let epoch_loss = total / n as f64;
        if !epoch_loss.is_finite() || !model.is_finite() {
            return Err(Error::Diverged {
                epoch,
                step,
                lr: sgdr_lr(step.saturating_sub(1), steps_per_epoch, cfg),
                loss: epoch_loss,
            });
        }
        if epoch_loss < best.0 {
            best = (epoch_loss, epoch, model.clone());
            improved_this_cycle = true;
        }
        if epochs_run == cfg.warm_epochs {
            improved_this_cycle = false;
        } else if is_cycle_end(epochs_run, cfg) {
            stale_cycles = if improved_this_cycle {
                0
            } else {
                stale_cycles + 1
            };
            improved_this_cycle = false;
            if stale_cycles >= cfg.patience_cycles.max(1) {
                stopped_early = epochs_run < cfg.max_epochs;
                break;
            }
        }
    }

    let (best_loss, best_epoch, model) = best;
    Ok(TrainOutcome {
        model,
        best_loss,
        best_epoch,
        epochs_run,
        stopped_early,
    })
}

/// Fraction of `test` whose argmax prediction equals its label.
///
/// With `seen`, predictions range over those classes only.
pub fn evaluate<T: Scalar>(
    model: &MlpModel<T>,
    test: &[Instance],
    normalizer: &Normalizer,
    seen: Option<&[ClassId]>,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let mask: Option<Vec<bool>> = seen.map(|classes| {
        let mut m = vec![false; model.num_classes()];
        for c in classes {
            if let Some(v) = m.get_mut(c.index()) {
                *v = true;
            }
        }
        m
    });
    const CHUNK: usize = 1000;
    let mut correct = 0usize;
    for chunk in test.chunks(CHUNK) {
        let x: Array2<T> = normalizer.features(chunk)?;
        let pred = model.predict(x.view(), mask.as_deref())?;
        correct += pred
            .iter()
            .zip(chunk)
            .filter(|(&p, i)| p == i.class().index())
            .count();
    }
    Ok(correct as f64 / test.len() as f64)
}
