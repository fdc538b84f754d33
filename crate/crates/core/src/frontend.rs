//! Mixes the two mics, resamples to the analysis rate, cuts fixed 2 s
//! segments, and computes the auditory spectrogram the network consumes.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::physio::Trace;
use crate::signal::{linear_interpolate, Signal};

/// Analysis sample rate after mixing.
pub const FRONTEND_RATE_HZ: f64 = 16_000.0;
/// Samples per 2 s segment at the analysis rate.
pub const SEGMENT_SAMPLES: usize = 32_000;
/// Target frames per segment at 100 Hz.
pub const SEGMENT_FRAMES: usize = 200;
/// Spectrogram channels.
pub const N_CHANNELS: usize = 128;
/// Spectrogram frames per segment.
pub const SPEC_FRAMES: usize = 250;
/// Spectrogram hop.
pub const FRAME_HOP_S: f64 = 0.008;

const CHANNEL_LO_HZ: f64 = 180.0;
const CHANNEL_HI_HZ: f64 = 7_246.0;
// Constant-Q resonator bank sharpness.
const CHANNEL_Q: f64 = 8.0;
// Leaky-integrator memory in samples (8 ms at 16 kHz).
const LEAK_SAMPLES: f64 = 128.0;
const PEAK_NORM_TARGET: f64 = 0.9;

/// Auditory spectrogram of one 2 s segment.
#[derive(Debug, Clone, PartialEq)]
pub struct AudSpec {
    /// Shape (channels, frames), all entries finite and non-negative.
    pub bins: Array2<f64>,
    /// Ascending, log-spaced channel centers.
    pub channel_freqs_hz: Vec<f64>,
    pub frame_hop_s: f64,
}

/// One fixed-length training example cut from an utterance.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Exactly `SEGMENT_SAMPLES` at 16 kHz; the tail may be zero padding.
    pub audio: Signal,
    /// Each exactly `SEGMENT_FRAMES` long, padded with zeros past
    /// `valid_frames`.
    pub targets: Vec<Trace>,
    /// Unpadded frame count, at least 1.
    pub valid_frames: usize,
    pub utterance_id: String,
    pub segment_index: usize,
}

/// Log-spaced channel centers spanning the analysis band exactly.
pub fn channel_frequencies() -> Vec<f64> {
    let ratio = CHANNEL_HI_HZ / CHANNEL_LO_HZ;
    (0..N_CHANNELS)
        .map(|i| CHANNEL_LO_HZ * ratio.powf(i as f64 / (N_CHANNELS - 1) as f64))
        .collect()
}

/// Averages the two mics and linearly interpolates onto the uniform
/// 16 kHz grid. If the mixed peak exceeds 1.0 the output is scaled to a
/// 0.9 peak.
pub fn mix_and_resample(oral: &Signal, nasal: &Signal) -> Result<Signal> {
    if oral.rate_hz != nasal.rate_hz {
        return Err(Error::RateMismatch {
            a: oral.rate_hz,
            b: nasal.rate_hz,
        });
    }
    if oral.len() != nasal.len() {
        return Err(Error::LengthMismatch {
            a: oral.len(),
            b: nasal.len(),
        });
    }
    crate::signal::check_signal(oral, 2)?;
    crate::signal::check_signal(nasal, 2)?;
    let mixed_samples: Vec<f64> = oral
        .samples
        .iter()
        .zip(&nasal.samples)
        .map(|(&o, &n)| 0.5 * (o + n))
        .collect();
    let peak = mixed_samples.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let mixed = Signal::with_t0(mixed_samples, oral.rate_hz, oral.t0_s);

    let n_out = ((mixed.len() - 1) as f64 * FRONTEND_RATE_HZ / mixed.rate_hz).floor() as usize + 1;
    let times: Vec<f64> = (0..n_out)
        .map(|j| mixed.t0_s + j as f64 / FRONTEND_RATE_HZ)
        .collect();
    let mut resampled = linear_interpolate(&mixed, &times)?;
    if peak > 1.0 {
        let gain = PEAK_NORM_TARGET / peak;
        for x in &mut resampled {
            *x *= gain;
        }
    }
    Ok(Signal::with_t0(resampled, FRONTEND_RATE_HZ, mixed.t0_s))
}

/// Cuts audio and 100 Hz targets into aligned 2 s windows; the final
/// partial window is zero padded and its real frame count recorded.
pub fn segment_utterance(
    audio: &Signal,
    targets: &[Trace],
    utterance_id: &str,
) -> Result<Vec<Segment>> {
    crate::signal::check_signal(audio, 1)?;
    if audio.rate_hz != FRONTEND_RATE_HZ {
        return Err(Error::BadSampleRate(audio.rate_hz));
    }
    if targets.is_empty() {
        return Err(Error::Config("segment_utterance needs target traces".into()));
    }
    let n_frames = targets[0].len();
    for t in targets {
        if t.len() != n_frames {
            return Err(Error::LengthMismatch {
                a: n_frames,
                b: t.len(),
            });
        }
    }
    if n_frames == 0 {
        return Err(Error::EmptySignal);
    }
    // Audio and targets must describe the same duration within a frame.
    let samples_per_frame = (FRONTEND_RATE_HZ / 100.0) as usize;
    if audio.len().abs_diff(n_frames * samples_per_frame) > samples_per_frame {
        return Err(Error::LengthMismatch {
            a: audio.len(),
            b: n_frames * samples_per_frame,
        });
    }

    let n_seg = n_frames.div_ceil(SEGMENT_FRAMES);
    let mut segments = Vec::with_capacity(n_seg);
    for k in 0..n_seg {
        let frame_lo = k * SEGMENT_FRAMES;
        let frame_hi = ((k + 1) * SEGMENT_FRAMES).min(n_frames);
        let valid_frames = frame_hi - frame_lo;

        let sample_lo = (k * SEGMENT_SAMPLES).min(audio.len());
        let sample_hi = ((k + 1) * SEGMENT_SAMPLES).min(audio.len());
        let mut seg_audio = audio.samples[sample_lo..sample_hi].to_vec();
        seg_audio.resize(SEGMENT_SAMPLES, 0.0);

        let seg_targets: Vec<Trace> = targets
            .iter()
            .map(|t| {
                let mut values = t.values[frame_lo..frame_hi].to_vec();
                values.resize(SEGMENT_FRAMES, 0.0);
                Trace::new(
                    values,
                    t.rate_hz,
                    t.t0_s + frame_lo as f64 / t.rate_hz,
                    t.kind,
                )
            })
            .collect();

        segments.push(Segment {
            audio: Signal::with_t0(
                seg_audio,
                FRONTEND_RATE_HZ,
                audio.t0_s + sample_lo as f64 / FRONTEND_RATE_HZ,
            ),
            targets: seg_targets,
            valid_frames,
            utterance_id: utterance_id.to_string(),
            segment_index: k,
        });
    }
    Ok(segments)
}

/// Constant-Q filterbank spectrogram: per channel a two-pole resonator,
/// half-wave rectification, leaky integration, 8 ms sampling, and
/// cube-root compression.
pub fn audspec(segment_audio: &Signal) -> Result<AudSpec> {
    crate::signal::check_signal(segment_audio, 1)?;
    if segment_audio.rate_hz != FRONTEND_RATE_HZ {
        return Err(Error::BadSampleRate(segment_audio.rate_hz));
    }
    if segment_audio.len() != SEGMENT_SAMPLES {
        return Err(Error::ShapeMismatch {
            expected: format!("{SEGMENT_SAMPLES} samples"),
            got: format!("{} samples", segment_audio.len()),
        });
    }
    let freqs = channel_frequencies();
    let hop = LEAK_SAMPLES as usize;
    let leak = (-1.0 / LEAK_SAMPLES).exp();
    let mut bins = Array2::<f64>::zeros((N_CHANNELS, SPEC_FRAMES));
    for (c, &f_hz) in freqs.iter().enumerate() {
        let w = 2.0 * std::f64::consts::PI * f_hz / FRONTEND_RATE_HZ;
        let r = (-std::f64::consts::PI * (f_hz / CHANNEL_Q) / FRONTEND_RATE_HZ).exp();
        let (sin_w, cos_w) = w.sin_cos();
        let (sin_2w, cos_2w) = (2.0 * w).sin_cos();
        let a1 = -2.0 * r * cos_w;
        let a2 = r * r;
        let re = 1.0 + a1 * cos_w + a2 * cos_2w;
        let im = -(a1 * sin_w + a2 * sin_2w);
        let b0 = (re * re + im * im).sqrt();

        let (mut y1, mut y2) = (0.0f64, 0.0f64);
        let mut z = 0.0f64;
        let mut row = bins.row_mut(c);
        for (i, &x) in segment_audio.samples.iter().enumerate() {
            let y = b0 * x - a1 * y1 - a2 * y2;
            y2 = y1;
            y1 = y;
            z = leak * z + (1.0 - leak) * y.max(0.0);
            if (i + 1) % hop == 0 {
                row[(i + 1) / hop - 1] = z.cbrt();
            }
        }
    }
    Ok(AudSpec {
        bins,
        channel_freqs_hz: freqs,
        frame_hop_s: FRAME_HOP_S,
    })
}
