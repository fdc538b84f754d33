//! Model checkpoints.
//!
//! Layout, all little-endian: magic `VTCK`, version u32, config JSON
//! (u32 length prefix), blob count u32, then per blob a u32-prefixed
//! UTF-8 name, a u32 value count, and f32 values. Blobs carry the
//! trainable parameters plus batch-norm running statistics, so a
//! restored model reproduces evaluation output exactly.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tcn::model::{build_model, Model, ModelConfig};
use crate::tcn::Elem;

const MAGIC: [u8; 4] = *b"VTCK";
const VERSION: u32 = 1;
const MAX_NAME_BYTES: usize = 256;
const MAX_BLOB_VALUES: usize = 1 << 26;

pub fn write_checkpoint(
    path: &Path,
    cfg: &ModelConfig,
    blobs: &[(String, Vec<f32>)],
) -> Result<()> {
    let cfg_json = serde_json::to_vec(cfg).map_err(|e| Error::bad_file(path, e.to_string()))?;
    let mut bytes = Vec::new();
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(cfg_json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&cfg_json);
    bytes.extend_from_slice(&(blobs.len() as u32).to_le_bytes());
    for (name, values) in blobs {
        bytes.extend_from_slice(&(name.len() as u32).to_le_bytes());
        bytes.extend_from_slice(name.as_bytes());
        bytes.extend_from_slice(&(values.len() as u32).to_le_bytes());
        for &v in values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(ModelConfig, HashMap<String, Vec<f32>>)> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        let lo = *cursor;
        let hi = lo + n;
        if hi > bytes.len() {
            return Err(Error::bad_file(path, "truncated checkpoint"));
        }
        *cursor = hi;
        Ok(&bytes[lo..hi])
    };
    if take(&mut cursor, 4)? != MAGIC {
        return Err(Error::bad_file(path, "bad magic, not a checkpoint"));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::bad_file(
            path,
            format!("unsupported checkpoint version {version}"),
        ));
    }
    let cfg_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let cfg: ModelConfig = serde_json::from_slice(take(&mut cursor, cfg_len)?)
        .map_err(|e| Error::bad_file(path, format!("bad model config: {e}")))?;
    cfg.validate()
        .map_err(|e| Error::bad_file(path, format!("invalid model config: {e}")))?;
    let n_blobs = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let mut blobs = HashMap::with_capacity(n_blobs);
    for _ in 0..n_blobs {
        let name_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        if name_len == 0 || name_len > MAX_NAME_BYTES {
            return Err(Error::bad_file(
                path,
                format!("implausible blob name length {name_len}"),
            ));
        }
        let name = std::str::from_utf8(take(&mut cursor, name_len)?)
            .map_err(|_| Error::bad_file(path, "blob name is not UTF-8"))?
            .to_string();
        let count = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        if count > MAX_BLOB_VALUES {
            return Err(Error::bad_file(
                path,
                format!("implausible blob size {count}"),
            ));
        }
        let raw = take(&mut cursor, count * 4)?;
        let values: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::bad_file(path, format!("non-finite value in {name}")));
        }
        if blobs.insert(name.clone(), values).is_some() {
            return Err(Error::bad_file(path, format!("duplicate blob {name}")));
        }
    }
    if cursor != bytes.len() {
        return Err(Error::bad_file(path, "trailing bytes after checkpoint"));
    }
    Ok((cfg, blobs))
}

/// Writes the model's config, parameters, and running statistics.
pub fn save_model<E: Elem>(path: &Path, model: &Model<E>) -> Result<()> {
    write_checkpoint(path, &model.cfg, &model.export_blobs())
}

/// Rebuilds a model from a checkpoint. The element type is the
/// caller's choice; `cfg.precision` in the returned config records what
/// the file was trained with.
pub fn load_model<E: Elem>(path: &Path) -> Result<Model<E>> {
    let (cfg, blobs) = read_checkpoint(path)?;
    let mut model = build_model::<E>(&cfg)?;
    model
        .import_blobs(&blobs)
        .map_err(|e| Error::bad_file(path, format!("blob mismatch: {e}")))?;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> ModelConfig {
        ModelConfig {
            in_channels: 8,
            pre_filters: 8,
            dilated_filters: 8,
            n_targets: 2,
            ..Default::default()
        }
    }

    fn trained_model() -> Model<f32> {
        let mut model = build_model::<f32>(&small_cfg()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Array3::from_shape_simple_fn((4, 8, 250), || rng.gen_range(-1.0f32..1.0));
        let _ = model.forward_train(&x).unwrap();
        model
    }

    #[test]
    fn checkpoint_round_trips_the_model() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vtck");
        let model = trained_model();
        save_model(&path, &model).unwrap();
        let back = load_model::<f32>(&path).unwrap();
        assert_eq!(back.cfg, model.cfg);
        assert_eq!(back.export_blobs(), model.export_blobs());

        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let probe = Array3::from_shape_simple_fn((2, 8, 250), || rng.gen_range(-1.0f32..1.0));
        assert_eq!(
            back.forward_eval(&probe).unwrap(),
            model.forward_eval(&probe).unwrap()
        );
    }

    #[test]
    fn checkpoint_rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.vtck"), dir.path().join("b.vtck"));
        let model = trained_model();
        save_model(&a, &model).unwrap();
        save_model(&b, &load_model::<f32>(&a).unwrap()).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }

    #[test]
    fn checkpoint_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vtck");
        save_model(&path, &trained_model()).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(
            load_model::<f32>(&path),
            Err(Error::BadFile { .. })
        ));

        std::fs::write(&path, &bytes[..bytes.len() - 2]).unwrap();
        assert!(matches!(
            load_model::<f32>(&path),
            Err(Error::BadFile { .. })
        ));

        let mut trailing = bytes.clone();
        trailing.push(7);
        std::fs::write(&path, &trailing).unwrap();
        assert!(matches!(
            load_model::<f32>(&path),
            Err(Error::BadFile { .. })
        ));
    }

    #[test]
    fn checkpoint_rejects_mismatched_blobs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vtck");
        let model = trained_model();
        let mut blobs = model.export_blobs();
        blobs[0].1.pop();
        write_checkpoint(&path, &model.cfg, &blobs).unwrap();
        assert!(load_model::<f32>(&path).is_err());

        let mut renamed = model.export_blobs();
        renamed[0].0 = "mystery.weight".into();
        write_checkpoint(&path, &model.cfg, &renamed).unwrap();
        assert!(load_model::<f32>(&path).is_err());

        let dupes = vec![model.export_blobs()[0].clone(), model.export_blobs()[0].clone()];
        write_checkpoint(&path, &model.cfg, &dupes).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(Error::BadFile { .. })
        ));
    }

    #[test]
    fn checkpoint_rejects_unknown_config_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.vtck");
        let model = trained_model();
        save_model(&path, &model).unwrap();
        let bytes = std::fs::read(&path).unwrap();

        // Splice an extra key into the embedded JSON config.
        let cfg_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let json = String::from_utf8(bytes[12..12 + cfg_len].to_vec()).unwrap();
        let hacked = json.replacen('{', "{\"mystery\":1,", 1);
        let mut out = Vec::new();
        out.extend_from_slice(&bytes[..8]);
        out.extend_from_slice(&(hacked.len() as u32).to_le_bytes());
        out.extend_from_slice(hacked.as_bytes());
        out.extend_from_slice(&bytes[12 + cfg_len..]);
        std::fs::write(&path, &out).unwrap();
        assert!(matches!(
            read_checkpoint(&path),
            Err(Error::BadFile { .. })
        ));
    }
}
