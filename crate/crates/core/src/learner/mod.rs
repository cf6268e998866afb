//! The rehearsal learner: a 2-layer MLP retrained from scratch on memory.

mod cutmix;
mod mlp;
mod schedule;
mod train;

pub use cutmix::{apply_cutmix, cutmix_apply, draw_cutmix, CutBox, CutmixDraw};
pub use mlp::{softmax, Gradients, MlpModel};
pub use schedule::{is_cycle_end, sgdr_lr, TrainConfig};
pub use train::{evaluate, train_on_buffer, TrainOutcome};
