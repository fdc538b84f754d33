//! JSON persistence for corpus and split manifests.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::train::{CorpusManifest, SplitManifest};

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::bad_file(path, format!("serialize: {e}")))?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::bad_file(path, format!("parse: {e}")))
}

pub fn write_manifest(path: &Path, manifest: &CorpusManifest) -> Result<()> {
    write_json(path, manifest)
}

pub fn read_manifest(path: &Path) -> Result<CorpusManifest> {
    let manifest: CorpusManifest = read_json(path)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_split(path: &Path, split: &SplitManifest) -> Result<()> {
    write_json(path, split)
}

pub fn read_split(path: &Path) -> Result<SplitManifest> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::train::{ContrastTag, Sex, SpeakerRecord, UtteranceRecord};
    use std::collections::BTreeMap;

    fn tiny_manifest() -> CorpusManifest {
        CorpusManifest {
            seed: 5,
            n_speakers: 1,
            utterances_per_speaker: 1,
            speakers: vec![SpeakerRecord {
                id: "spk00".into(),
                sex: Sex::Female,
                profile_seed: 77,
            }],
            utterances: vec![UtteranceRecord {
                id: "spk00_utt00".into(),
                speaker_id: "spk00".into(),
                oral_path: "spk00_utt00_oral.wav".into(),
                nasal_path: "spk00_utt00_nasal.wav".into(),
                egg_path: "spk00_utt00_egg.wav".into(),
                hsv_path: None,
                vp_path: None,
                duration_s: 1.3,
                contrast: ContrastTag::RimeNasal,
            }],
            file_hashes: BTreeMap::new(),
        }
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let manifest = tiny_manifest();
        write_manifest(&path, &manifest).unwrap();
        let back = read_manifest(&path).unwrap();
        assert_eq!(manifest, back);
    }

    #[test]
    fn read_rejects_unknown_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut value = serde_json::to_value(tiny_manifest()).unwrap();
        value["surprise"] = serde_json::json!(1);
        std::fs::write(&path, serde_json::to_vec(&value).unwrap()).unwrap();
        assert!(matches!(read_manifest(&path), Err(Error::BadFile { .. })));
    }

    #[test]
    fn split_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("splits.json");
        let split = SplitManifest {
            train: vec!["a".into(), "b".into()],
            val: vec!["c".into()],
            test: vec!["d".into()],
            seed: 3,
        };
        write_split(&path, &split).unwrap();
        assert_eq!(read_split(&path).unwrap(), split);
    }
}
