//! Diffusion-side math: noise schedule, forward process, clean-latent
//! estimate, stereo deviation strength and the stereo-aware training loss.

mod embedding;
mod loss;
mod schedule;
mod tensor;

pub use self::embedding::{sds_embedding, EmbeddingVector, EMBEDDING_BASE, EMBEDDING_SCALE};
pub use self::loss::{combined_loss, deviation_strength, noise_loss, stereo_loss, CombinedLoss};
pub use self::schedule::{
    diffuse_with_alpha_bar, estimate_clean, estimate_clean_with_alpha_bar, forward_diffuse,
    NoiseSchedule,
};
pub use self::tensor::LatentTensor;

/// Default weight of the stereo-aware term in the combined loss.
pub const DEFAULT_LAMBDA_LOSS: f64 = 0.001;
