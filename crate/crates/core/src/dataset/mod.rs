//! Labelled corpora: filename label schemes, directory scanning, Monte
//! Carlo splits, batching and a synthetic acceptance corpus.

mod batch;
mod cache;
mod labels;
mod manifest;
mod split;
mod synth;

use thiserror::Error;

pub use batch::{make_batches, pack_batch, Batch, BatchMode};
pub use cache::{extract_manifest, features_from_wav_bytes, FeatureCache};
pub use labels::{parse_label, EmotionLabel, LabelScheme, SchemeKind};
pub use manifest::{scan_dataset, DatasetManifest, ManifestEntry, Reject, ScanOutcome};
pub use split::{monte_carlo_split, monte_carlo_split_stratified, split_indices, Fold, SplitPlan};
pub use synth::{synth_clip, synth_clips, synth_corpus, SynthSpec};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("no label mapping matches '{0}'")]
    UnrecognizedFilename(String),
    #[error("unknown label scheme '{0}'")]
    UnknownScheme(String),
    #[error("bad label mapping: {0}")]
    BadMappingFile(String),
    #[error("no usable audio files ({} rejected)", rejects.len())]
    EmptyDataset { rejects: Vec<Reject> },
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),
    #[error("feature map {index} is {h}x{w}, below the minimum {min_h}x{min_w}")]
    FeatureBelowMinimum {
        index: usize,
        h: usize,
        w: usize,
        min_h: usize,
        min_w: usize,
    },
    #[error("bad manifest: {0}")]
    BadManifest(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl DatasetError {
    pub fn name(&self) -> &'static str {
        match self {
            DatasetError::UnrecognizedFilename(_) => "UnrecognizedFilename",
            DatasetError::UnknownScheme(_) => "UnknownScheme",
            DatasetError::BadMappingFile(_) => "BadMappingFile",
            DatasetError::EmptyDataset { .. } => "EmptyDataset",
            DatasetError::DatasetTooSmall(_) => "DatasetTooSmall",
            DatasetError::FeatureBelowMinimum { .. } => "FeatureBelowMinimum",
            DatasetError::BadManifest(_) => "BadManifest",
            DatasetError::Io(_) => "Io",
        }
    }
}
