//! WAV reading and writing for the corpus signals.
//!
//! Corpus files are mono 32-bit float PCM at 51,200 Hz; the reader also
//! accepts 16-bit integer PCM (scaled to [-1, 1)) so external
//! recordings can enter the pipeline. Everything else is rejected.

use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use crate::error::{Error, Result};
use crate::signal::Signal;

pub fn write_wav(path: impl AsRef<Path>, signal: &Signal) -> Result<()> {
    let path = path.as_ref();
    let rate = signal.rate_hz.round();
    if !rate.is_finite() || rate <= 0.0 || (signal.rate_hz - rate).abs() > 1e-9 || rate > u32::MAX as f64 {
        return Err(Error::BadSampleRate(signal.rate_hz));
    }
    let spec = WavSpec {
        channels: 1,
        sample_rate: rate as u32,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path, spec)?;
    for &s in &signal.samples {
        writer.write_sample(s as f32)?;
    }
    writer.finalize()?;
    Ok(())
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::bad_file(
            path,
            format!("expected mono audio, got {} channels", spec.channels),
        ));
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader
            .samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<std::result::Result<_, _>>()?,
        (SampleFormat::Int, 16) => reader
            .samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<std::result::Result<_, _>>()?,
        (fmt, bits) => {
            return Err(Error::bad_file(
                path,
                format!("unsupported sample format {fmt:?} at {bits} bits; use 32-bit float or 16-bit PCM"),
            ))
        }
    };
    Ok(Signal::new(samples, f64::from(spec.sample_rate)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wav_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.wav");
        let p2 = dir.path().join("b.wav");
        let n = 4096;
        let x = Signal::new(
            (0..n)
                .map(|i| ((i as f64 * 0.013).sin() * 0.8) as f32 as f64)
                .collect(),
            51200.0,
        );
        write_wav(&p1, &x).unwrap();
        let back = read_wav(&p1).unwrap();
        assert_eq!(back.rate_hz, 51200.0);
        assert_eq!(back.samples, x.samples);
        write_wav(&p2, &back).unwrap();
        let b1 = std::fs::read(&p1).unwrap();
        let b2 = std::fs::read(&p2).unwrap();
        assert_eq!(b1, b2, "write-read-write must be byte identical");
    }

    #[test]
    fn wav_reads_int16() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i16.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        for v in [-32768i16, 0, 16384, 32767] {
            w.write_sample(v).unwrap();
        }
        w.finalize().unwrap();
        let x = read_wav(&p).unwrap();
        assert_eq!(x.samples, vec![-1.0, 0.0, 0.5, 32767.0 / 32768.0]);
    }

    #[test]
    fn wav_rejects_other_formats() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("i24.wav");
        let spec = WavSpec {
            channels: 1,
            sample_rate: 16000,
            bits_per_sample: 24,
            sample_format: SampleFormat::Int,
        };
        let mut w = WavWriter::create(&p, spec).unwrap();
        w.write_sample(1234i32).unwrap();
        w.finalize().unwrap();
        assert!(matches!(read_wav(&p), Err(Error::BadFile { .. })));
    }
}
