//! Five-module keyword-spotting model with an implicit echo canceller.
//!
//! A shared audio encoder embeds both the microphone signal and the dry
//! playback reference; a refiner ([`refine_mask_d`] or [`refine_mask_c`])
//! predicts a sigmoid mask from the pair and multiplies it into the mixed
//! embedding; a causal self-attention extractor fuses the result with the
//! text query; a GRU discriminator emits the utterance and per-phoneme
//! probabilities. Training ([`train`]) sees only mixed signals, playback
//! references and labels — echo cancellation emerges without a clean target.

mod config;
mod net;
mod params;
mod train;

pub use config::{MaskKind, ModelConfig};
pub use net::{
    apply_mask, audio_encode, audio_encode_features, discriminate, encoder_features, forward,
    forward_from_embeddings, forward_loss, loss, pattern_extract, refine, refine_mask_c,
    refine_mask_d, text_encode, AudioEmbedding, EmbeddingRole, JointEmbedding, ModelOutput,
};
pub use params::ModelParams;
pub use train::{train, TrainConfig, TrainOutcome};
