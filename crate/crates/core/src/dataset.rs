//! From corpus recordings to training-ready examples: target
//! extraction, microphone mixing, segmentation, and spectrogram
//! computation, plus an on-disk cache of the results.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::frontend::{audspec, mix_and_resample, segment_utterance, AudSpec, SEGMENT_FRAMES};
use crate::io::{read_wav, write_audspec, write_trace};
use crate::physio::{
    app_surrogate, compute_nasalance, compute_voicing, NasalanceConfig, Trace, TraceKind,
};
use crate::signal::Signal;
use crate::train::{CorpusManifest, UtteranceRecord};

/// Pipelines that consume different channels may disagree by an edge
/// frame; anything larger means the recordings do not match.
const MAX_FRAME_SLACK: usize = 2;

/// Extracts the five estimation targets from one utterance's
/// recordings, in report column order ([`TraceKind::TARGETS`]),
/// truncated to their common length.
pub fn extract_targets(oral: &Signal, nasal: &Signal, egg: &Signal) -> Result<Vec<Trace>> {
    if egg.rate_hz != oral.rate_hz {
        return Err(Error::RateMismatch {
            a: oral.rate_hz,
            b: egg.rate_hz,
        });
    }
    let cfg = NasalanceConfig::default();
    let (nasalance, _) = compute_nasalance(oral, nasal, &cfg)?;
    let (voicing, _) = compute_voicing(egg, &cfg)?;
    let (periodicity, aperiodicity, pitch) = app_surrogate(egg, cfg.target_rate_hz)?;
    let mut traces = vec![nasalance, voicing, periodicity, aperiodicity, pitch];
    let shortest = traces.iter().map(Trace::len).min().expect("five traces");
    for t in &mut traces {
        if t.len() - shortest > MAX_FRAME_SLACK {
            return Err(Error::LengthMismatch {
                a: t.len(),
                b: shortest,
            });
        }
        t.values.truncate(shortest);
    }
    Ok(traces)
}

/// One fixed-length example: auditory spectrogram input plus target
/// rows, with the unpadded frame count.
#[derive(Debug, Clone)]
pub struct PreparedSegment {
    pub utterance_id: String,
    pub segment_index: usize,
    pub spec: AudSpec,
    /// Shape (5, SEGMENT_FRAMES), rows in [`TraceKind::TARGETS`] order.
    pub targets: Array2<f64>,
    pub valid_frames: usize,
}

#[derive(Debug, Clone)]
pub struct PreparedUtterance {
    pub id: String,
    pub speaker_id: String,
    /// Full-length target traces, [`TraceKind::TARGETS`] order.
    pub traces: Vec<Trace>,
    pub segments: Vec<PreparedSegment>,
}

impl PreparedUtterance {
    /// Unpadded frames across all segments; equals the trace length.
    pub fn n_frames(&self) -> usize {
        self.segments.iter().map(|s| s.valid_frames).sum()
    }
}

/// Every utterance of a corpus, prepared in manifest order.
#[derive(Debug, Clone, Default)]
pub struct PreparedDataset {
    pub utterances: Vec<PreparedUtterance>,
}

impl PreparedDataset {
    pub fn utterance(&self, id: &str) -> Result<&PreparedUtterance> {
        self.utterances
            .iter()
            .find(|u| u.id == id)
            .ok_or_else(|| Error::UnknownUtterance(id.to_string()))
    }

    /// Segments of the named utterances, in id order then segment
    /// order, so downstream iteration is deterministic.
    pub fn segments_for(&self, ids: &[String]) -> Result<Vec<&PreparedSegment>> {
        let mut out = Vec::new();
        for id in ids {
            out.extend(self.utterance(id)?.segments.iter());
        }
        Ok(out)
    }

    pub fn total_segments(&self) -> usize {
        self.utterances.iter().map(|u| u.segments.len()).sum()
    }
}

/// Reads one utterance's recordings and produces its examples.
pub fn prepare_utterance(corpus_dir: &Path, record: &UtteranceRecord) -> Result<PreparedUtterance> {
    let oral = read_wav(corpus_dir.join(&record.oral_path))?;
    let nasal = read_wav(corpus_dir.join(&record.nasal_path))?;
    let egg = read_wav(corpus_dir.join(&record.egg_path))?;
    let traces = extract_targets(&oral, &nasal, &egg)?;
    let audio = mix_and_resample(&oral, &nasal)?;
    let segments = segment_utterance(&audio, &traces, &record.id)?;
    let prepared = segments
        .into_iter()
        .map(|seg| {
            let spec = audspec(&seg.audio)?;
            let mut targets = Array2::<f64>::zeros((TraceKind::TARGETS.len(), SEGMENT_FRAMES));
            for (row, trace) in seg.targets.iter().enumerate() {
                for (col, &v) in trace.values.iter().enumerate() {
                    targets[(row, col)] = v;
                }
            }
            Ok(PreparedSegment {
                utterance_id: seg.utterance_id,
                segment_index: seg.segment_index,
                spec,
                targets,
                valid_frames: seg.valid_frames,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedUtterance {
        id: record.id.clone(),
        speaker_id: record.speaker_id.clone(),
        traces,
        segments: prepared,
    })
}

/// Prepares the whole corpus in manifest order.
pub fn prepare_dataset(corpus_dir: &Path, manifest: &CorpusManifest) -> Result<PreparedDataset> {
    manifest.validate()?;
    let utterances = manifest
        .utterances
        .iter()
        .map(|record| prepare_utterance(corpus_dir, record))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedDataset { utterances })
}

/// Writes the prepared targets and spectrograms next to each other:
/// `{utterance}_{kind}.csv` per target trace and
/// `{utterance}_seg{index}.adsp` per segment.
pub fn write_dataset_cache(dir: &Path, dataset: &PreparedDataset) -> Result<usize> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = 0usize;
    for utt in &dataset.utterances {
        for trace in &utt.traces {
            let path = dir.join(format!("{}_{}.csv", utt.id, trace.kind.as_str()));
            write_trace(&path, trace)?;
            written += 1;
        }
        for seg in &utt.segments {
            let path = dir.join(format!("{}_seg{}.adsp", utt.id, seg.segment_index));
            write_audspec(&path, &seg.spec)?;
            written += 1;
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::N_CHANNELS;
    use crate::synth::{build_corpus, synthesize_utterance, rime_nasal_script, SpeakerProfile};
    use crate::train::Sex;

    fn tiny_corpus() -> (tempfile::TempDir, CorpusManifest) {
        let dir = tempfile::tempdir().unwrap();
        let manifest = build_corpus(dir.path(), 3, 2, 11).unwrap();
        (dir, manifest)
    }

    #[test]
    fn extracted_targets_share_a_length_and_range() {
        let profile = SpeakerProfile::sample(5, Sex::Female);
        let out = synthesize_utterance(&profile, &rime_nasal_script(), 5).unwrap();
        let traces = extract_targets(&out.oral, &out.nasal, &out.egg).unwrap();
        assert_eq!(traces.len(), 5);
        let n = traces[0].len();
        assert!(n > 0);
        for (trace, kind) in traces.iter().zip(TraceKind::TARGETS) {
            assert_eq!(trace.kind, kind);
            assert_eq!(trace.len(), n);
            assert!(trace.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn prepared_segments_tile_the_utterance_exactly() {
        let (dir, manifest) = tiny_corpus();
        let dataset = prepare_dataset(dir.path(), &manifest).unwrap();
        assert_eq!(dataset.utterances.len(), manifest.utterances.len());
        for utt in &dataset.utterances {
            let n_frames = utt.traces[0].len();
            let covered: usize = utt.segments.iter().map(|s| s.valid_frames).sum();
            assert_eq!(covered, n_frames, "{}", utt.id);
            assert_eq!(utt.n_frames(), n_frames);
            for (k, seg) in utt.segments.iter().enumerate() {
                assert_eq!(seg.segment_index, k);
                assert_eq!(seg.spec.bins.dim(), (N_CHANNELS, 250));
                assert_eq!(seg.targets.dim(), (5, SEGMENT_FRAMES));
                assert!(seg.spec.bins.iter().all(|v| v.is_finite() && *v >= 0.0));
                // Rows reproduce the full traces over the valid span.
                for row in 0..5 {
                    for col in 0..seg.valid_frames {
                        let full = utt.traces[row].values[k * SEGMENT_FRAMES + col];
                        assert_eq!(seg.targets[(row, col)], full);
                    }
                    for col in seg.valid_frames..SEGMENT_FRAMES {
                        assert_eq!(seg.targets[(row, col)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn segment_lookup_is_ordered_and_checked() {
        let (dir, manifest) = tiny_corpus();
        let dataset = prepare_dataset(dir.path(), &manifest).unwrap();
        let ids: Vec<String> = manifest.utterances.iter().map(|u| u.id.clone()).collect();
        let segs = dataset.segments_for(&ids).unwrap();
        assert_eq!(segs.len(), dataset.total_segments());
        assert!(dataset.segments_for(&["missing".into()]).is_err());
        assert!(dataset.utterance(&ids[0]).is_ok());
    }

    #[test]
    fn dataset_cache_writes_every_artifact() {
        let (dir, manifest) = tiny_corpus();
        let dataset = prepare_dataset(dir.path(), &manifest).unwrap();
        let cache = dir.path().join("cache");
        let written = write_dataset_cache(&cache, &dataset).unwrap();
        let expected = dataset.utterances.len() * 5 + dataset.total_segments();
        assert_eq!(written, expected);
        let first = &dataset.utterances[0];
        let spec_path = cache.join(format!("{}_seg0.adsp", first.id));
        let back = crate::io::read_audspec(&spec_path).unwrap();
        assert_eq!(back.bins.dim(), first.segments[0].spec.bins.dim());
        let trace_path = cache.join(format!("{}_nasalance.csv", first.id));
        assert!(trace_path.exists());
    }

    #[test]
    fn missing_recordings_fail_loudly() {
        let (dir, mut manifest) = tiny_corpus();
        manifest.utterances[0].oral_path = "absent.wav".into();
        assert!(matches!(
            prepare_dataset(dir.path(), &manifest),
            Err(Error::Wav(_) | Error::Io { .. })
        ));
    }
}
