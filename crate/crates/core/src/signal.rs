//! Deterministic 1-D DSP primitives shared by all parameter-extraction
//! pipelines.
//!
//! All routines run in 64-bit arithmetic, are pure functions of their
//! inputs, and preserve sample count unless the contract says otherwise.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Uniformly sampled waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    /// Dimensionless amplitude values.
    pub samples: Vec<f64>,
    /// Sample rate in samples/second. Always positive.
    pub rate_hz: f64,
    /// Start-time offset in seconds of sample 0.
    pub t0_s: f64,
}

impl Signal {
    /// Signal starting at t = 0.
    pub fn new(samples: Vec<f64>, rate_hz: f64) -> Self {
        Signal {
            samples,
            rate_hz,
            t0_s: 0.0,
        }
    }

    /// Signal with an explicit start-time offset.
    pub fn with_t0(samples: Vec<f64>, rate_hz: f64, t0_s: f64) -> Self {
        Signal {
            samples,
            rate_hz,
            t0_s,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Time of sample `i` in seconds.
    pub fn sample_time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.rate_hz
    }

    /// Time of the last sample; equals `t0_s` for a single sample.
    pub fn end_time(&self) -> f64 {
        if self.samples.is_empty() {
            self.t0_s
        } else {
            self.sample_time(self.samples.len() - 1)
        }
    }

    /// Span covered by the samples at one sample per `1/rate_hz` seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.rate_hz
    }
}

/// Smoothing window description. Windows are always centered on the
/// output sample; edge windows shrink rather than zero-pad.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    pub length_samples: usize,
}

impl WindowSpec {
    pub fn centered(length_samples: usize) -> Self {
        WindowSpec { length_samples }
    }
}

pub(crate) fn check_signal(x: &Signal, min_len: usize) -> Result<()> {
    if !(x.rate_hz > 0.0 && x.rate_hz.is_finite()) {
        return Err(Error::BadSampleRate(x.rate_hz));
    }
    if x.samples.is_empty() {
        return Err(Error::EmptySignal);
    }
    if x.samples.len() < min_len {
        return Err(Error::TooShort {
            len: x.samples.len(),
            min: min_len,
        });
    }
    for (index, &value) in x.samples.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteSample { index, value });
        }
    }
    Ok(())
}

/// Steady-state filter state for the start of a pass, from the means of
/// two consecutive ~tau-long blocks: block means suppress content far
/// above the cutoff, and their difference gives the local trend so the
/// state starts at level - slope*tau (what the filter would settle to).
/// This kills the start-up transient a plain `x[0]` initialization
/// leaves on offset or drifting signals.
fn edge_init(pass_input: impl Iterator<Item = f64>, rate_hz: f64, tau_s: f64, n: usize) -> f64 {
    let h = ((tau_s * rate_hz).round() as usize).clamp(1, n / 2);
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    for (i, v) in pass_input.take(2 * h).enumerate() {
        if i < h {
            m1 += v;
        } else {
            m2 += v;
        }
    }
    m1 /= h as f64;
    m2 /= h as f64;
    let slope_per_sample = (m2 - m1) / h as f64;
    let level_at_start = m1 - slope_per_sample * (h as f64 - 1.0) / 2.0;
    level_at_start - slope_per_sample * tau_s * rate_hz
}

/// Remove slow baseline drift (including DC) with zero phase.
///
/// A first-order recursive low-pass (coefficient `a = exp(-2*pi*fc/fs)`)
/// estimates the baseline forward then backward over the signal, and the
/// estimate is subtracted. Running it in both directions cancels the
/// filter's group delay, so traces stay aligned with the audio.
pub fn highpass_baseline(x: &Signal, cutoff_hz: f64) -> Result<Signal> {
    check_signal(x, 2)?;
    let nyquist = x.rate_hz / 2.0;
    if !(cutoff_hz > 0.0 && cutoff_hz < nyquist) {
        return Err(Error::BadCutoff {
            cutoff_hz,
            nyquist_hz: nyquist,
        });
    }
    let a = (-2.0 * PI * cutoff_hz / x.rate_hz).exp();
    let b = 1.0 - a;
    let tau_s = 1.0 / (2.0 * PI * cutoff_hz);
    let n = x.samples.len();
    let mut baseline = vec![0.0; n];
    let mut state = edge_init(x.samples.iter().copied(), x.rate_hz, tau_s, n);
    for (out, &sample) in baseline.iter_mut().zip(&x.samples) {
        state = a * state + b * sample;
        *out = state;
    }
    let mut state = edge_init(baseline.iter().rev().copied(), x.rate_hz, tau_s, n);
    for out in baseline.iter_mut().rev() {
        state = a * state + b * *out;
        *out = state;
    }
    let samples = x
        .samples
        .iter()
        .zip(&baseline)
        .map(|(&s, &b)| s - b)
        .collect();
    Ok(Signal {
        samples,
        rate_hz: x.rate_hz,
        t0_s: x.t0_s,
    })
}

/// Split an even or odd window length into (left, right) reach so that
/// left + right + 1 == length.
fn window_reach(length: usize) -> (usize, usize) {
    ((length - 1) / 2, length / 2)
}

/// Windowed means against an anchored prefix sum.
///
/// Sums run over deviations from the first sample, which keeps constants
/// exact (their deviations are identically zero) and keeps rounding error
/// proportional to signal variation instead of absolute level.
fn windowed_mean(samples: &[f64], length: usize) -> Vec<f64> {
    let n = samples.len();
    let anchor = samples[0];
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &s in samples {
        acc += s - anchor;
        prefix.push(acc);
    }
    let (left, right) = window_reach(length);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let lo = i.saturating_sub(left);
        let hi = (i + right).min(n - 1);
        let count = (hi - lo + 1) as f64;
        out.push(anchor + (prefix[hi + 1] - prefix[lo]) / count);
    }
    out
}

/// Centered moving average with edge-truncated windows.
pub fn moving_average(x: &Signal, w: WindowSpec) -> Result<Signal> {
    check_signal(x, 1)?;
    if w.length_samples == 0 || w.length_samples > x.samples.len() {
        return Err(Error::BadWindow {
            window: w.length_samples,
            len: x.samples.len(),
        });
    }
    Ok(Signal {
        samples: windowed_mean(&x.samples, w.length_samples),
        rate_hz: x.rate_hz,
        t0_s: x.t0_s,
    })
}

/// Windowed root-mean-square: `sqrt(moving_average(x^2))`.
pub fn rms_envelope(x: &Signal, w: WindowSpec) -> Result<Signal> {
    check_signal(x, 1)?;
    if w.length_samples == 0 || w.length_samples > x.samples.len() {
        return Err(Error::BadWindow {
            window: w.length_samples,
            len: x.samples.len(),
        });
    }
    let squared: Vec<f64> = x.samples.iter().map(|&s| s * s).collect();
    let samples = windowed_mean(&squared, w.length_samples)
        .into_iter()
        // Truncated window means of squares are non-negative up to
        // rounding; clamp so sqrt never sees a tiny negative.
        .map(|m| m.max(0.0).sqrt())
        .collect();
    Ok(Signal {
        samples,
        rate_hz: x.rate_hz,
        t0_s: x.t0_s,
    })
}

/// Instantaneous amplitude via the frequency-domain analytic signal:
/// negative frequencies zeroed, positive doubled, DC (and Nyquist for
/// even lengths) kept, then magnitude of the inverse transform.
pub fn hilbert_envelope(x: &Signal) -> Result<Signal> {
    check_signal(x, 8)?;
    let n = x.samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    let ifft = planner.plan_fft_inverse(n);
    let mut buf: Vec<Complex<f64>> = x
        .samples
        .iter()
        .map(|&s| Complex::new(s, 0.0))
        .collect();
    fft.process(&mut buf);
    let half = n / 2;
    if n.is_multiple_of(2) {
        for v in &mut buf[1..half] {
            *v *= 2.0;
        }
        for v in &mut buf[half + 1..] {
            *v = Complex::new(0.0, 0.0);
        }
    } else {
        for v in &mut buf[1..=half] {
            *v *= 2.0;
        }
        for v in &mut buf[half + 1..] {
            *v = Complex::new(0.0, 0.0);
        }
    }
    ifft.process(&mut buf);
    let scale = 1.0 / n as f64;
    let samples = buf.iter().map(|v| v.norm() * scale).collect();
    Ok(Signal {
        samples,
        rate_hz: x.rate_hz,
        t0_s: x.t0_s,
    })
}

/// Downsample by an integer factor using non-overlapping block means.
///
/// The caller is expected to have smoothed the signal already; the block
/// mean only adds cheap extra anti-alias insurance. Output sample `k`
/// carries the center time of block `k`, so round-tripping through
/// `linear_interpolate` stays phase-aligned with the input.
pub fn resample_to(x: &Signal, target_rate_hz: f64) -> Result<Signal> {
    check_signal(x, 1)?;
    if !(target_rate_hz > 0.0 && target_rate_hz.is_finite()) {
        return Err(Error::BadSampleRate(target_rate_hz));
    }
    let ratio = x.rate_hz / target_rate_hz;
    let factor = ratio.round();
    if factor < 1.0 || (ratio - factor).abs() > 1e-9 * ratio.abs() {
        return Err(Error::NonIntegerDecimation {
            source_hz: x.rate_hz,
            target_hz: target_rate_hz,
        });
    }
    let k = factor as usize;
    let n_out = x.samples.len() / k;
    if n_out == 0 {
        return Err(Error::TooShort {
            len: x.samples.len(),
            min: k,
        });
    }
    let mut samples = Vec::with_capacity(n_out);
    for block in 0..n_out {
        let chunk = &x.samples[block * k..(block + 1) * k];
        let anchor = chunk[0];
        let dev: f64 = chunk.iter().map(|&s| s - anchor).sum();
        samples.push(anchor + dev / k as f64);
    }
    Ok(Signal {
        samples,
        rate_hz: target_rate_hz,
        t0_s: x.t0_s + (k as f64 - 1.0) / (2.0 * x.rate_hz),
    })
}

// Queries this close to a grid node (in fractional-sample units) snap to
// the node, so sample times reconstructed in floating point still return
// the original value exactly.
const NODE_SNAP: f64 = 1e-9;

/// Piecewise-linear interpolation of `x` at the requested times.
///
/// Times must be sorted and lie within the signal's support; values at
/// original sample times are returned exactly.
pub fn linear_interpolate(x: &Signal, target_times_s: &[f64]) -> Result<Vec<f64>> {
    check_signal(x, 2)?;
    let n = x.samples.len();
    let end = x.end_time();
    let slack = NODE_SNAP / x.rate_hz;
    let mut out = Vec::with_capacity(target_times_s.len());
    for &t in target_times_s {
        if t < x.t0_s - slack || t > end + slack {
            return Err(Error::TimeOutOfSupport {
                t,
                t0: x.t0_s,
                t1: end,
            });
        }
        let u = ((t - x.t0_s) * x.rate_hz).clamp(0.0, (n - 1) as f64);
        let mut i = u.floor() as usize;
        let mut frac = u - i as f64;
        if frac < NODE_SNAP {
            frac = 0.0;
        } else if frac > 1.0 - NODE_SNAP {
            i += 1;
            frac = 0.0;
        }
        if i >= n - 1 {
            i = n - 1;
            out.push(x.samples[i]);
        } else {
            out.push(x.samples[i] + frac * (x.samples[i + 1] - x.samples[i]));
        }
    }
    Ok(out)
}

/// Affine map of `[src_min, src_max]` onto `[-1, 1]`.
pub fn normalize_affine(x: &Signal, src_min: f64, src_max: f64) -> Result<Signal> {
    check_signal(x, 1)?;
    if !(src_min.is_finite() && src_max.is_finite()) || src_max <= src_min {
        return Err(Error::DegenerateRange {
            min: src_min,
            max: src_max,
        });
    }
    let span = src_max - src_min;
    let samples = x
        .samples
        .iter()
        .map(|&s| 2.0 * (s - src_min) / span - 1.0)
        .collect();
    Ok(Signal {
        samples,
        rate_hz: x.rate_hz,
        t0_s: x.t0_s,
    })
}
