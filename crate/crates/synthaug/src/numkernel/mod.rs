//! Dense-vector numeric substrate: MLPs with reverse-mode gradients, stable
//! reductions, diagonal-Gaussian utilities, Adam, and splittable RNG streams.

mod adam;
mod mlp;
mod rng;
pub(crate) mod tensor;

pub use adam::{adam_step, AdamState};
pub use mlp::{Activation, GradTape, Layer, Mlp, MlpGrads};
pub use rng::{normal, normal_vec, rng_stream, substream, RngStream};
pub use tensor::{dot, gaussian_kl, l2_norm, logsumexp, shannon_entropy, softmax, Tensor};
