//! Extraction pipelines for physiological parameter traces: nasalance
//! from the dual-microphone pair, voicing from the EGG envelope, an
//! autocorrelation surrogate for the aperiodicity/periodicity/pitch
//! source description, and the endoscopy-brightness validation analysis.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::eval::ppmc;
use crate::signal::{
    highpass_baseline, hilbert_envelope, linear_interpolate, moving_average, normalize_affine,
    resample_to, rms_envelope, Signal, WindowSpec,
};

/// What a trace measures. Network targets are the first five kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    Nasalance,
    Voicing,
    Periodicity,
    Aperiodicity,
    Pitch,
    HsvIntensity,
    /// Synthesizer ground-truth port opening, range [0, 1].
    PortOpening,
    Generic,
}

impl TraceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceKind::Nasalance => "nasalance",
            TraceKind::Voicing => "voicing",
            TraceKind::Periodicity => "periodicity",
            TraceKind::Aperiodicity => "aperiodicity",
            TraceKind::Pitch => "pitch",
            TraceKind::HsvIntensity => "hsv_intensity",
            TraceKind::PortOpening => "port_opening",
            TraceKind::Generic => "generic",
        }
    }

    /// Kinds the network learns to estimate, in report column order.
    pub const TARGETS: [TraceKind; 5] = [
        TraceKind::Nasalance,
        TraceKind::Voicing,
        TraceKind::Periodicity,
        TraceKind::Aperiodicity,
        TraceKind::Pitch,
    ];

    /// Row index of this kind in [`TraceKind::TARGETS`], if it is one.
    pub fn target_row(self) -> Option<usize> {
        TraceKind::TARGETS.iter().position(|&k| k == self)
    }
}

/// Physiological parameter time series. Network-target kinds run at
/// 100 Hz with values normalized into [-1, 1]; the endoscopy intensity
/// trace runs at 1 kHz.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub values: Vec<f64>,
    pub rate_hz: f64,
    pub t0_s: f64,
    pub kind: TraceKind,
}

impl Trace {
    pub fn new(values: Vec<f64>, rate_hz: f64, t0_s: f64, kind: TraceKind) -> Self {
        Trace {
            values,
            rate_hz,
            t0_s,
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_time(&self, i: usize) -> f64 {
        self.t0_s + i as f64 / self.rate_hz
    }

    pub fn end_time(&self) -> f64 {
        if self.values.is_empty() {
            self.t0_s
        } else {
            self.sample_time(self.values.len() - 1)
        }
    }

    pub fn as_signal(&self) -> Signal {
        Signal::with_t0(self.values.clone(), self.rate_hz, self.t0_s)
    }
}

/// Tunables of the nasalance pipeline; `compute_voicing` reuses the
/// cutoff, target rate, and smoothing window.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NasalanceConfig {
    pub hp_cutoff_hz: f64,
    pub rms_window_samples: usize,
    pub target_rate_hz: f64,
    pub smooth_window_samples: usize,
}

impl Default for NasalanceConfig {
    fn default() -> Self {
        NasalanceConfig {
            hp_cutoff_hz: 0.1,
            rms_window_samples: 1000,
            target_rate_hz: 100.0,
            smooth_window_samples: 10,
        }
    }
}

impl NasalanceConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hp_cutoff_hz.is_nan() || self.hp_cutoff_hz <= 0.0 {
            return Err(Error::Config(format!(
                "hp_cutoff_hz must be positive, got {}",
                self.hp_cutoff_hz
            )));
        }
        if self.rms_window_samples == 0 {
            return Err(Error::Config("rms_window_samples must be positive".into()));
        }
        if self.target_rate_hz.is_nan() || self.target_rate_hz <= 0.0 {
            return Err(Error::Config(format!(
                "target_rate_hz must be positive, got {}",
                self.target_rate_hz
            )));
        }
        if self.smooth_window_samples == 0 {
            return Err(Error::Config("smooth_window_samples must be positive".into()));
        }
        Ok(())
    }
}

/// Counters describing degenerate stretches the pipelines patched over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExtractionDiagnostics {
    /// Samples where the Eq-style denominator fell below the guard and
    /// the raw ratio was imputed as 0.
    pub guarded_samples: usize,
    /// Set when the whole input was degenerate (e.g. an all-zero EGG).
    pub degenerate_input: bool,
}

// Denominator guard for the energy-ratio computation.
const RATIO_GUARD: f64 = 1e-12;

/// Raw nasalance ratio in [0, 1] at the smoothed 100 Hz output stage:
/// per-mic baseline removal, RMS envelopes, pointwise
/// `rms_nasal / (rms_nasal + rms_oral)`, block-mean decimation to the
/// target rate, then the short smoothing window.
pub fn nasalance_raw(
    oral: &Signal,
    nasal: &Signal,
    cfg: &NasalanceConfig,
) -> Result<(Trace, ExtractionDiagnostics)> {
    cfg.validate().map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("nasalance: {msg}")),
        other => other,
    })?;
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
    let w = WindowSpec::centered(cfg.rms_window_samples);
    let rms_oral = rms_envelope(&highpass_baseline(oral, cfg.hp_cutoff_hz)?, w)?;
    let rms_nasal = rms_envelope(&highpass_baseline(nasal, cfg.hp_cutoff_hz)?, w)?;

    let mut diag = ExtractionDiagnostics::default();
    let ratio: Vec<f64> = rms_nasal
        .samples
        .iter()
        .zip(&rms_oral.samples)
        .map(|(&n, &o)| {
            let denom = n + o;
            if denom < RATIO_GUARD {
                diag.guarded_samples += 1;
                0.0
            } else {
                n / denom
            }
        })
        .collect();
    let ratio = Signal::with_t0(ratio, oral.rate_hz, oral.t0_s);
    let smoothed = moving_average(
        &resample_to(&ratio, cfg.target_rate_hz)?,
        WindowSpec::centered(cfg.smooth_window_samples),
    )?;
    let trace = Trace::new(
        smoothed.samples,
        smoothed.rate_hz,
        smoothed.t0_s,
        TraceKind::Nasalance,
    );
    Ok((trace, diag))
}

/// Normalized nasalance trace in [-1, 1] at 100 Hz.
///
/// Normalization maps the analytic ratio range [0, 1] onto [-1, 1] with
/// a fixed affine (not per-utterance extremes), so values are comparable
/// across utterances and speakers.
pub fn compute_nasalance(
    oral: &Signal,
    nasal: &Signal,
    cfg: &NasalanceConfig,
) -> Result<(Trace, ExtractionDiagnostics)> {
    let (raw, diag) = nasalance_raw(oral, nasal, cfg)?;
    let normalized = normalize_affine(&raw.as_signal(), 0.0, 1.0)?;
    let values = normalized
        .samples
        .into_iter()
        // The smoothing arithmetic can overshoot the analytic range by a
        // few ulps; the contract range is hard.
        .map(|v| v.clamp(-1.0, 1.0))
        .collect();
    Ok((
        Trace::new(values, raw.rate_hz, raw.t0_s, TraceKind::Nasalance),
        diag,
    ))
}

/// Voicing trace in [-1, 1] at 100 Hz from the EGG envelope.
///
/// Pipeline: baseline removal, Hilbert envelope, block-mean decimation,
/// short smoothing, then per-utterance scaling of [0, max] onto [-1, 1].
/// The envelope has no analytic upper bound, so unlike nasalance the
/// normalization is per-utterance. An all-zero EGG maps to constant -1
/// with the degenerate flag set.
pub fn compute_voicing(
    egg: &Signal,
    cfg: &NasalanceConfig,
) -> Result<(Trace, ExtractionDiagnostics)> {
    cfg.validate().map_err(|e| match e {
        Error::Config(msg) => Error::Config(format!("voicing: {msg}")),
        other => other,
    })?;
    let envelope = hilbert_envelope(&highpass_baseline(egg, cfg.hp_cutoff_hz)?)?;
    let smoothed = moving_average(
        &resample_to(&envelope, cfg.target_rate_hz)?,
        WindowSpec::centered(cfg.smooth_window_samples),
    )?;
    let mut diag = ExtractionDiagnostics::default();
    let max = smoothed.samples.iter().fold(0.0f64, |m, &v| m.max(v));
    let values = if max < RATIO_GUARD {
        diag.degenerate_input = true;
        vec![-1.0; smoothed.samples.len()]
    } else {
        smoothed
            .samples
            .iter()
            .map(|&v| (2.0 * v / max - 1.0).clamp(-1.0, 1.0))
            .collect()
    };
    Ok((
        Trace::new(values, smoothed.rate_hz, smoothed.t0_s, TraceKind::Voicing),
        diag,
    ))
}

/// Frame length for the source-feature analysis: 25 ms.
const APP_FRAME_S: f64 = 0.025;
/// Pitch search band in Hz.
const PITCH_MIN_HZ: f64 = 60.0;
const PITCH_MAX_HZ: f64 = 400.0;
/// Frames with peak autocorrelation below this are treated as unpitched.
const PITCH_GATE: f64 = 0.3;
// A lag at twice the true period scores within this margin of the
// period itself (finite windows leave the comparison that loose), so
// pitch comes from the shortest local peak inside the margin rather
// than the global argmax.
const OCTAVE_MARGIN: f64 = 0.02;

/// Source-feature surrogate per frame: periodicity as the peak
/// normalized autocorrelation over the 60-400 Hz lag range,
/// aperiodicity as its complement, and pitch from the shortest local
/// autocorrelation peak within the octave margin of that maximum. All
/// three are affinely mapped into [-1, 1]; unpitched frames (peak
/// below the gate) emit pitch -1.
pub fn app_surrogate(
    audio: &Signal,
    frame_rate_hz: f64,
) -> Result<(Trace, Trace, Trace)> {
    if frame_rate_hz.is_nan() || frame_rate_hz <= 0.0 {
        return Err(Error::BadSampleRate(frame_rate_hz));
    }
    let frame_len = (audio.rate_hz * APP_FRAME_S).round() as usize;
    let hop_f = audio.rate_hz / frame_rate_hz;
    let hop = hop_f.round() as usize;
    if hop == 0 || (hop_f - hop as f64).abs() > 1e-9 * hop_f {
        return Err(Error::NonIntegerDecimation {
            source_hz: audio.rate_hz,
            target_hz: frame_rate_hz,
        });
    }
    let n = audio.len();
    if n < frame_len {
        return Err(Error::TooShort {
            len: n,
            min: frame_len,
        });
    }
    let lag_min = (audio.rate_hz / PITCH_MAX_HZ).ceil() as usize;
    let lag_max = (audio.rate_hz / PITCH_MIN_HZ).floor() as usize;
    if lag_max >= frame_len {
        return Err(Error::Config(format!(
            "frame of {frame_len} samples cannot search lags up to {lag_max}"
        )));
    }

    let n_full = (n - frame_len) / hop + 1;
    // The trace covers the utterance at the frame rate; the last frames
    // whose windows would overrun hold the final analyzed value.
    let n_out = ((n as f64 / hop as f64).round() as usize).max(n_full);
    let mut periodicity = Vec::with_capacity(n_out);
    let mut pitch = Vec::with_capacity(n_out);
    let mut sq_prefix = vec![0.0f64; frame_len + 1];
    let mut rs = vec![0.0f64; lag_max - lag_min + 1];
    for f in 0..n_full {
        let frame = &audio.samples[f * hop..f * hop + frame_len];
        for (i, &s) in frame.iter().enumerate() {
            sq_prefix[i + 1] = sq_prefix[i] + s * s;
        }
        for lag in lag_min..=lag_max {
            let m = frame_len - lag;
            let mut num = 0.0;
            for i in 0..m {
                num += frame[i] * frame[i + lag];
            }
            let e_head = sq_prefix[m];
            let e_tail = sq_prefix[frame_len] - sq_prefix[lag];
            let denom2 = e_head * e_tail;
            rs[lag - lag_min] = if denom2 < RATIO_GUARD * RATIO_GUARD {
                0.0
            } else {
                (num / denom2.sqrt()).clamp(0.0, 1.0)
            };
        }
        let best_r = rs.iter().cloned().fold(0.0f64, f64::max);
        let mut best_lag = 0usize;
        for (k, &r) in rs.iter().enumerate() {
            let left_ok = k == 0 || r >= rs[k - 1];
            let right_ok = k + 1 == rs.len() || r >= rs[k + 1];
            if left_ok && right_ok && r >= best_r - OCTAVE_MARGIN {
                best_lag = lag_min + k;
                break;
            }
        }
        periodicity.push(best_r);
        if best_r < PITCH_GATE || best_lag == 0 {
            pitch.push(-1.0);
        } else {
            let hz = audio.rate_hz / best_lag as f64;
            let mapped = 2.0 * (hz - PITCH_MIN_HZ) / (PITCH_MAX_HZ - PITCH_MIN_HZ) - 1.0;
            pitch.push(mapped.clamp(-1.0, 1.0));
        }
    }
    while periodicity.len() < n_out {
        periodicity.push(*periodicity.last().expect("n_full >= 1"));
        pitch.push(*pitch.last().expect("n_full >= 1"));
    }
    let aperiodicity: Vec<f64> = periodicity.iter().map(|&p| 2.0 * (1.0 - p) - 1.0).collect();
    let periodicity: Vec<f64> = periodicity.iter().map(|&p| 2.0 * p - 1.0).collect();
    // Frame values describe the window center.
    let t0 = audio.t0_s + frame_len as f64 / (2.0 * audio.rate_hz);
    Ok((
        Trace::new(periodicity, frame_rate_hz, t0, TraceKind::Periodicity),
        Trace::new(aperiodicity, frame_rate_hz, t0, TraceKind::Aperiodicity),
        Trace::new(pitch, frame_rate_hz, t0, TraceKind::Pitch),
    ))
}

/// Pearson agreement between a trace pair on a common time grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub r: f64,
    /// Two-sided p-value proxy from the t-statistic transform of r.
    pub p_proxy: f64,
    /// Number of paired samples in the overlap.
    pub n: usize,
}

// Validation needs at least this much shared time support.
const MIN_OVERLAP_S: f64 = 1.0;

/// Correlate a nasalance trace against an endoscopy brightness trace.
///
/// The 100 Hz nasalance is linearly interpolated onto the brightness
/// trace's 1 kHz grid restricted to the overlapping support. Brightness
/// falls as the port opens, so a faithful pair correlates negatively.
pub fn validate_against_hsv(nasalance: &Trace, hsv: &Trace) -> Result<CorrelationReport> {
    let lo = nasalance.t0_s.max(hsv.t0_s);
    let hi = nasalance.end_time().min(hsv.end_time());
    if hi - lo < MIN_OVERLAP_S {
        return Err(Error::InsufficientOverlap {
            overlap_s: (hi - lo).max(0.0),
            min_s: MIN_OVERLAP_S,
        });
    }
    let mut times = Vec::new();
    let mut hsv_vals = Vec::new();
    for (i, &v) in hsv.values.iter().enumerate() {
        let t = hsv.sample_time(i);
        if t >= lo && t <= hi {
            times.push(t);
            hsv_vals.push(v);
        }
    }
    let nas_vals = linear_interpolate(&nasalance.as_signal(), &times)?;
    let r = match ppmc(&nas_vals, &hsv_vals) {
        Err(Error::ConstantSequence("first")) => Err(Error::ConstantSequence("nasalance")),
        Err(Error::ConstantSequence("second")) => Err(Error::ConstantSequence("hsv")),
        other => other,
    }?;
    let n = nas_vals.len();
    let p_proxy = p_from_r(r, n);
    Ok(CorrelationReport { r, p_proxy, n })
}

/// Two-sided p-value of the t-statistic `r*sqrt((n-2)/(1-r^2))` under
/// the n-2 degrees-of-freedom Student distribution.
fn p_from_r(r: f64, n: usize) -> f64 {
    if n < 3 {
        return f64::NAN;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - r * r;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = r.abs() * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("valid dof");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const RATE: f64 = 51200.0;

    fn sine(amp: f64, freq: f64, dur: f64) -> Signal {
        let n = (RATE * dur).round() as usize;
        Signal::new(
            (0..n)
                .map(|i| amp * (2.0 * PI * freq * i as f64 / RATE).sin())
                .collect(),
            RATE,
        )
    }

    fn speechish(seed: u64, dur: f64) -> Signal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (RATE * dur).round() as usize;
        Signal::new(
            (0..n)
                .map(|i| {
                    let t = i as f64 / RATE;
                    (2.0 * PI * 140.0 * t).sin() + 0.3 * rng.gen_range(-1.0..1.0)
                })
                .collect(),
            RATE,
        )
    }

    #[test]
    fn nasalance_zero_nasal_is_minus_one() {
        let oral = speechish(1, 1.0);
        let nasal = Signal::new(vec![0.0; oral.len()], RATE);
        let cfg = NasalanceConfig::default();
        let (raw, diag) = nasalance_raw(&oral, &nasal, &cfg).unwrap();
        assert!(raw.values.iter().all(|&v| v == 0.0), "raw must be exactly 0");
        assert_eq!(diag.guarded_samples, 0);
        let (tr, _) = compute_nasalance(&oral, &nasal, &cfg).unwrap();
        assert!(tr.values.iter().all(|&v| v == -1.0), "normalized must be exactly -1");
    }

    #[test]
    fn nasalance_symmetric_is_zero() {
        let x = speechish(2, 1.0);
        let cfg = NasalanceConfig::default();
        let (raw, _) = nasalance_raw(&x, &x, &cfg).unwrap();
        assert!(raw.values.iter().all(|&v| v == 0.5), "raw must be exactly 0.5");
        let (tr, _) = compute_nasalance(&x, &x, &cfg).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0), "normalized must be exactly 0");
    }

    #[test]
    fn nasalance_oral_zero_is_plus_one() {
        let nasal = speechish(3, 1.0);
        let oral = Signal::new(vec![0.0; nasal.len()], RATE);
        let cfg = NasalanceConfig::default();
        let (raw, _) = nasalance_raw(&oral, &nasal, &cfg).unwrap();
        assert!(raw.values.iter().all(|&v| v == 1.0));
        let (tr, _) = compute_nasalance(&oral, &nasal, &cfg).unwrap();
        assert!(tr.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn nasalance_amplitude_ratio_three_to_one() {
        let oral = sine(1.0, 180.0, 1.5);
        let nasal = sine(3.0, 180.0, 1.5);
        let cfg = NasalanceConfig::default();
        let (raw, _) = nasalance_raw(&oral, &nasal, &cfg).unwrap();
        let n = raw.len();
        for &v in &raw.values[n / 5..4 * n / 5] {
            assert!((v - 0.75).abs() < 0.01, "raw {v} vs 0.75");
        }
        let (tr, _) = compute_nasalance(&oral, &nasal, &cfg).unwrap();
        for &v in &tr.values[n / 5..4 * n / 5] {
            assert!((v - 0.5).abs() < 0.02, "normalized {v} vs 0.5");
        }
    }

    #[test]
    fn nasalance_dead_frames_are_guarded() {
        let n = (RATE * 1.0) as usize;
        let oral = Signal::new(vec![0.0; n], RATE);
        let nasal = Signal::new(vec![0.0; n], RATE);
        let cfg = NasalanceConfig::default();
        let (raw, diag) = nasalance_raw(&oral, &nasal, &cfg).unwrap();
        assert_eq!(diag.guarded_samples, n, "every sample is dead");
        assert!(raw.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn nasalance_gain_invariance() {
        let oral = speechish(4, 1.0);
        let nasal = speechish(5, 1.0);
        let cfg = NasalanceConfig::default();
        let (base, _) = compute_nasalance(&oral, &nasal, &cfg).unwrap();
        for c in [0.1, 7.3] {
            let oral_c = Signal::new(oral.samples.iter().map(|&s| c * s).collect(), RATE);
            let nasal_c = Signal::new(nasal.samples.iter().map(|&s| c * s).collect(), RATE);
            let (scaled, _) = compute_nasalance(&oral_c, &nasal_c, &cfg).unwrap();
            let max = base
                .values
                .iter()
                .zip(&scaled.values)
                .fold(0.0f64, |m, (&a, &b)| m.max((a - b).abs()));
            assert!(max < 1e-9, "gain {c}: max deviation {max}");
        }
    }

    #[test]
    fn nasalance_channel_swap_antisymmetry() {
        let oral = speechish(6, 1.0);
        let nasal = speechish(7, 1.0);
        let cfg = NasalanceConfig::default();
        let (fwd, _) = nasalance_raw(&oral, &nasal, &cfg).unwrap();
        let (swp, _) = nasalance_raw(&nasal, &oral, &cfg).unwrap();
        for (a, b) in fwd.values.iter().zip(&swp.values) {
            assert!((a - (1.0 - b)).abs() < 1e-9, "{a} vs 1-{b}");
        }
        let (nfwd, _) = compute_nasalance(&oral, &nasal, &cfg).unwrap();
        let (nswp, _) = compute_nasalance(&nasal, &oral, &cfg).unwrap();
        for (a, b) in nfwd.values.iter().zip(&nswp.values) {
            assert!((a + b).abs() < 1e-9, "normalized swap must negate");
        }
    }

    #[test]
    fn nasalance_range_always_bounded() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..5 {
            let n = (RATE * 0.6) as usize;
            let oral = Signal::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), RATE);
            let nasal = Signal::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), RATE);
            let (tr, _) = compute_nasalance(&oral, &nasal, &NasalanceConfig::default()).unwrap();
            assert!(tr.values.iter().all(|&v| (-1.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn nasalance_rejects_mismatch() {
        let a = sine(1.0, 100.0, 0.5);
        let b = Signal::new(a.samples[..a.len() - 5].to_vec(), RATE);
        assert!(nasalance_raw(&a, &b, &NasalanceConfig::default()).is_err());
        let c = Signal::new(a.samples.clone(), 16000.0);
        assert!(nasalance_raw(&a, &c, &NasalanceConfig::default()).is_err());
    }

    #[test]
    fn voicing_zero_egg_is_minus_one() {
        let egg = Signal::new(vec![0.0; (RATE * 1.0) as usize], RATE);
        let (tr, diag) = compute_voicing(&egg, &NasalanceConfig::default()).unwrap();
        assert!(tr.values.iter().all(|&v| v == -1.0));
        assert!(diag.degenerate_input);
    }

    #[test]
    fn voicing_steady_sinusoid_saturates() {
        let egg = sine(0.8, 120.0, 2.0);
        let (tr, diag) = compute_voicing(&egg, &NasalanceConfig::default()).unwrap();
        assert!(!diag.degenerate_input);
        let n = tr.len();
        for &v in &tr.values[n / 10..9 * n / 10] {
            assert!(v > 0.95, "interior voicing {v}");
        }
        assert!(tr.values.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn voicing_gated_sinusoid_transition() {
        // 120 Hz on for the first second of a 2 s signal.
        let n = (RATE * 2.0) as usize;
        let gate_at = n / 2;
        let samples: Vec<f64> = (0..n)
            .map(|i| {
                if i < gate_at {
                    0.9 * (2.0 * PI * 120.0 * i as f64 / RATE).sin()
                } else {
                    0.0
                }
            })
            .collect();
        let (tr, _) = compute_voicing(&Signal::new(samples, RATE), &NasalanceConfig::default())
            .unwrap();
        let n100 = tr.len();
        for &v in &tr.values[n100 / 10..4 * n100 / 10] {
            assert!(v > 0.9, "voiced half {v}");
        }
        for &v in &tr.values[6 * n100 / 10..9 * n100 / 10] {
            assert!(v < -0.9, "silent half {v}");
        }
        // Transition width between the -0.5 and +0.5 crossings.
        let cross = |level: f64| -> f64 {
            for i in 0..n100 - 1 {
                let (a, b) = (tr.values[i], tr.values[i + 1]);
                if (a - level) * (b - level) <= 0.0 && a != b && a > b {
                    let w = (a - level) / (a - b);
                    return tr.sample_time(i) + w / tr.rate_hz;
                }
            }
            panic!("no {level} crossing found");
        };
        let width = cross(-0.5) - cross(0.5);
        assert!(width > 0.0 && width <= 0.055, "transition width {width}");
    }

    #[test]
    fn app_white_noise_is_aperiodic() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 16000;
        let audio = Signal::new((0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(), 16000.0);
        let (perio, aperio, pitch) = app_surrogate(&audio, 100.0).unwrap();
        let mean_raw: f64 = perio.values.iter().map(|&v| (v + 1.0) / 2.0).sum::<f64>()
            / perio.len() as f64;
        assert!(mean_raw < 0.5, "mean raw periodicity {mean_raw}");
        let unpitched = pitch.values.iter().filter(|&&v| v == -1.0).count();
        assert!(
            unpitched as f64 >= 0.8 * pitch.len() as f64,
            "{unpitched}/{} frames unpitched",
            pitch.len()
        );
        for (p, a) in perio.values.iter().zip(&aperio.values) {
            assert!((p + a).abs() < 1e-12, "complement {p} {a}");
        }
    }

    #[test]
    fn app_pure_tone_pitch() {
        let n = 16000;
        let audio = Signal::new(
            (0..n)
                .map(|i| (2.0 * PI * 200.0 * i as f64 / 16000.0).sin())
                .collect(),
            16000.0,
        );
        let (perio, _, pitch) = app_surrogate(&audio, 100.0).unwrap();
        for &v in &perio.values {
            let raw = (v + 1.0) / 2.0;
            assert!(raw > 0.95, "raw periodicity {raw}");
        }
        let want = 2.0 * (200.0 - 60.0) / 340.0 - 1.0;
        let tol = 2.0 * 5.0 / 340.0;
        for &v in &pitch.values {
            assert!((v - want).abs() < tol, "mapped pitch {v} vs {want}");
        }
    }

    #[test]
    fn app_silence_is_degenerate() {
        let audio = Signal::new(vec![0.0; 8000], 16000.0);
        let (perio, aperio, pitch) = app_surrogate(&audio, 100.0).unwrap();
        assert!(perio.values.iter().all(|&v| v == -1.0));
        assert!(aperio.values.iter().all(|&v| v == 1.0));
        assert!(pitch.values.iter().all(|&v| v == -1.0));
    }

    #[test]
    fn app_rejects_short_audio() {
        let audio = Signal::new(vec![0.1; 300], 16000.0);
        assert!(app_surrogate(&audio, 100.0).is_err());
    }

    #[test]
    fn app_trace_length_covers_duration() {
        let audio = Signal::new(vec![0.0; 32000], 16000.0);
        let (perio, ..) = app_surrogate(&audio, 100.0).unwrap();
        assert_eq!(perio.len(), 200, "2 s at 100 Hz");
    }

    #[test]
    fn hsv_affine_anticorrelation() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let nas = Trace::new(
            (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            100.0,
            0.0,
            TraceKind::Nasalance,
        );
        let hsv_times: Vec<f64> = (0..3000).map(|j| j as f64 / 1000.0).collect();
        let nas_on_grid = linear_interpolate(&nas.as_signal(), &hsv_times[..2991]).unwrap();
        let hsv = Trace::new(
            nas_on_grid.iter().map(|&v| 2.0 - v).collect(),
            1000.0,
            0.0,
            TraceKind::HsvIntensity,
        );
        let rep = validate_against_hsv(&nas, &hsv).unwrap();
        assert!((rep.r + 1.0).abs() < 1e-12, "r = {}", rep.r);
        assert!(rep.p_proxy < 1e-6);
        assert!(rep.n >= 1000);
    }

    #[test]
    fn hsv_self_copy_correlates_plus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let nas = Trace::new(
            (0..300).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            100.0,
            0.0,
            TraceKind::Nasalance,
        );
        let times: Vec<f64> = (0..2990).map(|j| j as f64 / 1000.0).collect();
        let copy = Trace::new(
            linear_interpolate(&nas.as_signal(), &times).unwrap(),
            1000.0,
            0.0,
            TraceKind::HsvIntensity,
        );
        let rep = validate_against_hsv(&nas, &copy).unwrap();
        assert!((rep.r - 1.0).abs() < 1e-9);
    }

    #[test]
    fn hsv_independent_noise_uncorrelated() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let nas = Trace::new(
            (0..1200).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            100.0,
            0.0,
            TraceKind::Nasalance,
        );
        let hsv = Trace::new(
            (0..12000).map(|_| rng.gen_range(0.0..1.0)).collect(),
            1000.0,
            0.0,
            TraceKind::HsvIntensity,
        );
        let rep = validate_against_hsv(&nas, &hsv).unwrap();
        assert!(rep.n >= 10_000);
        assert!(rep.r.abs() < 0.1, "null correlation {}", rep.r);
    }

    #[test]
    fn hsv_rejects_short_overlap_and_constants() {
        let nas = Trace::new(vec![0.1; 50], 100.0, 0.0, TraceKind::Nasalance);
        let hsv = Trace::new(vec![0.5; 400], 1000.0, 0.0, TraceKind::HsvIntensity);
        assert!(matches!(
            validate_against_hsv(&nas, &hsv),
            Err(Error::InsufficientOverlap { .. })
        ));
        let nas = Trace::new(vec![0.1; 200], 100.0, 0.0, TraceKind::Nasalance);
        let hsv = Trace::new(vec![0.5; 2000], 1000.0, 0.0, TraceKind::HsvIntensity);
        assert!(matches!(
            validate_against_hsv(&nas, &hsv),
            Err(Error::ConstantSequence(_))
        ));
    }
}
