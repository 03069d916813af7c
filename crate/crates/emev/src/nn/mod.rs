//! Minimal tensor and reverse-mode-gradient engine plus the two model
//! builders: the dual-branch eigen-feature classifier (EMEV-IdNet) and the
//! full-CSI baseline (CSI-IdNet).
//!
//! Training and evaluation run in 32-bit; the engine is generic over the
//! scalar so gradient checks can run in 64-bit.

mod checkpoint;
mod count;
mod layers;
mod model;
mod train;

pub use checkpoint::{decode_checkpoint, load_checkpoint, save_checkpoint};
pub use count::{count_flops, count_params, layer_table, LayerKind, LayerSpec};
pub use layers::{
    conv2d_backward, conv2d_forward, conv3d_backward, conv3d_forward, cross_entropy_loss,
    dense_backward, dense_forward, leaky_relu, leaky_relu_backward, relu, relu_backward, softmax,
    LEAKY_SLOPE,
};
pub use model::{Arch, FeatureSet, Grads, ModelSpec, ModelState, SampleInput, NUM_CLASSES};
pub use train::{adam_step, evaluate, inference_latency, train, EpochStats, EvalReport, TrainConfig};

/// Scalar abstraction: f32 for training/eval, f64 for gradient tests.
pub trait Scalar:
    num_traits::Float + num_traits::NumAssign + std::iter::Sum + Send + Sync + std::fmt::Debug + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
}
