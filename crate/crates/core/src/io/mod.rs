//! File formats: JSON-lines datasets, binary prediction and embedding
//! containers, CSV result tables and JSON run manifests.
//!
//! Candidate fingerprints are packed LSB-first: bit `d` lives in byte `d / 8`
//! at position `d % 8`. With D = 10 and bits {0, 3, 9} set the bytes are
//! `[0x09, 0x02]`, base64 `"CQI="`. Padding bits past D must be zero.

mod dataset;
mod embeddings;
mod manifest;
mod predictions;
mod results;

pub use dataset::{
    load_dataset, write_dataset, Dataset, DatasetHeader, DatasetReader, DatasetWriter, LoadOptions, DATASET_FORMAT,
    DATASET_VERSION,
};
pub use embeddings::{load_embeddings, write_embeddings, EMBEDDING_MAGIC};
pub use manifest::{digest_input, read_manifest, sha256_file, write_manifest, InputDigest, Manifest};
pub use predictions::{
    load_predictions, write_predictions, PredictionHeader, PredictionIndex, PredictionReader, PredictionWriter,
    PREDICTION_MAGIC,
};
pub use results::{fmt_f64, parse_f64, read_score_table, write_curve, write_score_table, write_text, CsvOut};
