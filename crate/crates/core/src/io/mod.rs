//! On-disk formats: WAV signals, trace CSVs, the spectrogram cache,
//! model checkpoints, corpus/split manifests, and the run configuration.

pub mod audspec_cache;
pub mod checkpoint;
pub mod manifest;
pub mod run_config;
pub mod trace_csv;
pub mod wav;

pub use audspec_cache::{read_audspec, write_audspec};
pub use checkpoint::{load_model, read_checkpoint, save_model, write_checkpoint};
pub use manifest::{read_manifest, read_split, write_manifest, write_split};
pub use run_config::{read_run_config, write_run_config, RunConfig, RunPaths};
pub use trace_csv::{read_trace, write_trace};
pub use wav::{read_wav, write_wav};
