//! Binary cache for auditory spectrograms.
//!
//! Layout, all little-endian: magic `ADSP`, version u32, channel count
//! u32, frame count u32, frame hop f64, channel center frequencies
//! f64 each, then row-major (channel-major) f32 bins.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::frontend::AudSpec;

const MAGIC: [u8; 4] = *b"ADSP";
const VERSION: u32 = 1;

pub fn write_audspec(path: &Path, spec: &AudSpec) -> Result<()> {
    let (f, t) = spec.bins.dim();
    if spec.channel_freqs_hz.len() != f {
        return Err(Error::ShapeMismatch {
            expected: format!("{f} channel frequencies"),
            got: format!("{}", spec.channel_freqs_hz.len()),
        });
    }
    let mut bytes = Vec::with_capacity(4 + 4 + 8 + 8 + f * 8 + f * t * 4);
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(f as u32).to_le_bytes());
    bytes.extend_from_slice(&(t as u32).to_le_bytes());
    bytes.extend_from_slice(&spec.frame_hop_s.to_le_bytes());
    for &freq in &spec.channel_freqs_hz {
        bytes.extend_from_slice(&freq.to_le_bytes());
    }
    for &bin in spec.bins.iter() {
        bytes.extend_from_slice(&(bin as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_audspec(path: &Path) -> Result<AudSpec> {
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes).map_err(|e| Error::io(path, e))?;
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        let lo = *cursor;
        let hi = lo + n;
        if hi > bytes.len() {
            return Err(Error::bad_file(path, "truncated spectrogram cache"));
        }
        *cursor = hi;
        Ok(&bytes[lo..hi])
    };
    if take(&mut cursor, 4)? != MAGIC {
        return Err(Error::bad_file(path, "bad magic, not a spectrogram cache"));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::bad_file(
            path,
            format!("unsupported cache version {version}"),
        ));
    }
    let f = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    if f == 0 || t == 0 || f > 1 << 16 || t > 1 << 24 {
        return Err(Error::bad_file(path, format!("implausible shape {f}x{t}")));
    }
    let frame_hop_s = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
    if !frame_hop_s.is_finite() || frame_hop_s <= 0.0 {
        return Err(Error::bad_file(path, format!("bad frame hop {frame_hop_s}")));
    }
    let mut channel_freqs_hz = Vec::with_capacity(f);
    for _ in 0..f {
        let freq = f64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap());
        if !freq.is_finite() || freq <= 0.0 {
            return Err(Error::bad_file(path, format!("bad channel center {freq}")));
        }
        channel_freqs_hz.push(freq);
    }
    let mut bins = Array2::<f64>::zeros((f, t));
    for value in bins.iter_mut() {
        let raw = f32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
        if !raw.is_finite() {
            return Err(Error::bad_file(path, "non-finite spectrogram bin"));
        }
        *value = raw as f64;
    }
    if cursor != bytes.len() {
        return Err(Error::bad_file(path, "trailing bytes after spectrogram"));
    }
    Ok(AudSpec {
        bins,
        channel_freqs_hz,
        frame_hop_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{audspec, FRONTEND_RATE_HZ, SEGMENT_SAMPLES};
    use crate::signal::Signal;

    fn sample_spec() -> AudSpec {
        let samples: Vec<f64> = (0..SEGMENT_SAMPLES)
            .map(|i| 0.4 * (2.0 * std::f64::consts::PI * 700.0 * i as f64 / 16_000.0).sin())
            .collect();
        audspec(&Signal::new(samples, FRONTEND_RATE_HZ)).unwrap()
    }

    #[test]
    fn cache_round_trips_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.adsp");
        let spec = sample_spec();
        write_audspec(&path, &spec).unwrap();
        let back = read_audspec(&path).unwrap();
        assert_eq!(back.bins.dim(), spec.bins.dim());
        assert_eq!(back.channel_freqs_hz, spec.channel_freqs_hz);
        assert_eq!(back.frame_hop_s, spec.frame_hop_s);
        for (a, b) in spec.bins.iter().zip(back.bins.iter()) {
            assert_eq!(*a as f32, *b as f32);
        }
        // A second write of the reread spec is byte-identical.
        let path2 = dir.path().join("seg2.adsp");
        write_audspec(&path2, &back).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn cache_rejects_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seg.adsp");
        write_audspec(&path, &sample_spec()).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();

        let mut bad_magic = bytes.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(read_audspec(&path), Err(Error::BadFile { .. })));

        let truncated = &bytes[..bytes.len() - 3];
        std::fs::write(&path, truncated).unwrap();
        assert!(matches!(read_audspec(&path), Err(Error::BadFile { .. })));

        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_audspec(&path), Err(Error::BadFile { .. })));
    }
}
