//! Memory-budgeted rehearsal for class-incremental learning.
//!
//! A greedy class-balanced replay buffer holds a fixed number of bytes. Incoming
//! instances are first passed through a compression [`codecs::Codec`] (identity,
//! bilinear resize, semi-orthogonal random projection or precomputed external
//! latents), which trades per-instance fidelity for the number of instances that
//! fit. After every task a small MLP is trained from scratch on buffer contents
//! only and evaluated on all classes seen so far.
//!
//! The numeric core (model, projection) is generic over the floating-point
//! scalar; the aliases below fix it to `f32`, which is what the experiment
//! pipeline uses.

pub mod buffer;
pub mod codecs;
pub mod data;
pub mod error;
pub mod learner;
pub mod protocol;
pub mod rng;
pub mod scalar;
pub mod sweep;
pub mod types;

pub use buffer::{class_quota, ReplayBuffer};
pub use codecs::{Codec, CodecSpec, Normalizer};
pub use data::Dataset;
pub use error::{Error, Result};
pub use learner::TrainConfig;
pub use protocol::{RunReport, TaskStream};
pub use rng::{derive_rng, SeededRng};
pub use scalar::Scalar;
pub use types::{payload_bytes, ByteBudget, ClassId, ImageShape, ImageU8, Instance, Payload};

/// Single-precision MLP used by the experiment pipeline.
pub type Mlp = learner::MlpModel<f32>;
/// Gradients of [`Mlp`].
pub type MlpGradients = learner::Gradients<f32>;
/// Single-precision semi-orthogonal projection.
pub type Projection = codecs::ProjectionMatrix<f32>;
