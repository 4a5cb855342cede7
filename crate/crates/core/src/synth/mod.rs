//! Synthetic instances with planted ground truth, naive reference
//! implementations, and Monte-Carlo validation of the risk guarantee.

mod generator;
mod mc;
pub mod oracle;

pub use generator::{
    generate, generate_instance, generate_iter, training_embeddings, DifficultyModel, PlantedTruth, SynthConfig,
    SynthSample, MIN_SYNTH_DIM,
};
pub use mc::{mc_validate_sgr, planted_calibration_draw, planted_selective_risk, McReport};
pub use oracle::oracle_decomposition;
