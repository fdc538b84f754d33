//! Speech inversion toolkit for velopharyngeal (nasality) tracking.
//!
//! The crate covers the full experimental loop:
//!
//! * [`signal`]: sample-accurate DSP primitives (detrending, envelopes,
//!   rate conversion, affine normalization) shared by every pipeline.
//! * [`physio`]: physiological parameter extraction from dual-microphone
//!   and electroglottograph recordings: nasalance, voicing, and the
//!   aperiodicity/periodicity/pitch source description.
//! * [`synth`]: a deterministic articulatory-style synthesizer that
//!   generates paired corpora (oral mic, nasal mic, EGG, endoscopy
//!   brightness, ground-truth port opening) for end-to-end testing.
//! * [`frontend`]: the auditory spectrogram front end and fixed-length
//!   segmentation that feed the network.
//! * [`tcn`]: a self-contained dilated temporal convolutional network
//!   (forward, analytic backward, Adam) with no external ML dependency.
//! * [`train`]: speaker-independent splits, the training loop, and
//!   multi-trial experiment orchestration.
//! * [`eval`]: correlation metrics, per-utterance model evaluation, and
//!   gesture landmark/timing analysis.
//! * [`io`]: on-disk formats (WAV, trace CSV, spectrogram cache,
//!   checkpoints, manifests, run configuration).

pub mod dataset;
pub mod error;
pub mod eval;
pub mod frontend;
pub mod io;
pub mod physio;
pub mod signal;
pub mod synth;
pub mod tcn;
pub mod train;

pub use error::{Error, Result};
