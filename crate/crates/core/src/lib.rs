//! Speech emotion recognition on variable-length audio.
//!
//! The crate is organised as a pipeline:
//!
//! * [`audio`]: WAV decoding, down-mixing, resampling and segmentation.
//! * [`dsp`]: FFT, STFT, the mel filterbank, Mel spectrograms and MFCCs.
//! * [`nn`]: dense tensors and the kernels (convolution, pooling, loss, Adam)
//!   needed to train a fully convolutional network.
//! * [`model`]: the three-layer FCN classifier and its on-disk format.
//! * [`dataset`]: filename label schemes, corpus scanning, Monte Carlo splits,
//!   batching and a synthetic corpus generator.
//! * [`train`]: training with early stopping, evaluation and cross-validation.
//! * [`stream`]: segment-wise and incremental (online) emotion tracking.

pub mod audio;
pub mod dataset;
pub mod dsp;
pub mod error;
pub mod model;
pub mod nn;
pub mod stream;
pub mod train;

pub use error::{Error, Result};

/// Sample rate every feature extractor assumes by default.
pub const CANONICAL_SAMPLE_RATE: u32 = 22_050;
