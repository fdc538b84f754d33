//! Agreement metrics, per-utterance model evaluation, and gesture
//! landmark/timing analysis.

use std::fmt::Write as _;

use ndarray::Array3;
use serde::Serialize;

use crate::dataset::{PreparedDataset, PreparedUtterance};
use crate::error::{Error, Result};
use crate::io::trace_csv::fmt_sig6;
use crate::physio::{Trace, TraceKind};
use crate::signal::{moving_average, WindowSpec};
use crate::tcn::{Elem, Model};

/// Pearson product-moment correlation of two equal-length sequences.
///
/// Accumulates centered second moments in 64-bit arithmetic; the result
/// is clamped to [-1, 1] so downstream significance math never sees a
/// rounding excursion.
pub fn ppmc(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            a: a.len(),
            b: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::TooShort { len: a.len(), min: 2 });
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - ma;
        let dy = y - mb;
        cov += dx * dy;
        va += dx * dx;
        vb += dy * dy;
    }
    if va <= 0.0 {
        return Err(Error::ConstantSequence("first"));
    }
    if vb <= 0.0 {
        return Err(Error::ConstantSequence("second"));
    }
    Ok((cov / (va.sqrt() * vb.sqrt())).clamp(-1.0, 1.0))
}

/// Mean and population standard deviation; a single value has std 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Serialize)]
pub struct TargetEval {
    pub kind: TraceKind,
    pub ppmc_mean: f64,
    pub ppmc_std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct UtteranceScore {
    pub utterance_id: String,
    /// One PPMC per evaluated target, in the report's kind order.
    pub ppmc: Vec<f64>,
}

/// Per-target agreement of one model over a set of utterances.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    /// Model label, e.g. "SI-SF" or "SI-noSF".
    pub tag: String,
    pub targets: Vec<TargetEval>,
    pub n_utterances: usize,
    pub per_utterance: Vec<UtteranceScore>,
}

impl EvalReport {
    /// Mean over targets of the per-target mean, the report's last column.
    pub fn average(&self) -> f64 {
        let means: Vec<f64> = self.targets.iter().map(|t| t.ppmc_mean).collect();
        mean_std(&means).0
    }

    pub fn table(&self) -> String {
        let mut header = format!("{:<10}", "Model");
        for t in &self.targets {
            let _ = write!(header, "{:<16}", t.kind.as_str());
        }
        let _ = write!(header, "{:<16}", "Average");
        let mut row = format!("{:<10}", self.tag);
        for t in &self.targets {
            let _ = write!(row, "{:<16}", format!("{:.4}({:.2})", t.ppmc_mean, t.ppmc_std));
        }
        let _ = write!(row, "{:<16}", format!("{:.4}", self.average()));
        format!("{}\n{}\n", header.trim_end(), row.trim_end())
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("model,target,ppmc_mean,ppmc_std,n_utterances\n");
        for t in &self.targets {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                self.tag,
                t.kind.as_str(),
                fmt_sig6(t.ppmc_mean),
                fmt_sig6(t.ppmc_std),
                self.n_utterances
            );
        }
        out
    }
}

fn target_rows(kinds: &[TraceKind]) -> Result<Vec<usize>> {
    if kinds.is_empty() {
        return Err(Error::Config("no evaluation targets requested".into()));
    }
    kinds
        .iter()
        .map(|&k| {
            k.target_row()
                .ok_or_else(|| Error::Config(format!("{} is not an estimation target", k.as_str())))
        })
        .collect()
}

/// Ground-truth sequences for the requested targets, concatenated over
/// the unpadded frames of each segment in order.
pub fn truth_traces(utt: &PreparedUtterance, kinds: &[TraceKind]) -> Result<Vec<Vec<f64>>> {
    let rows = target_rows(kinds)?;
    let mut out = vec![Vec::with_capacity(utt.n_frames()); rows.len()];
    for seg in &utt.segments {
        for (slot, &row) in out.iter_mut().zip(&rows) {
            slot.extend(
                seg.targets
                    .row(row)
                    .iter()
                    .take(seg.valid_frames)
                    .copied(),
            );
        }
    }
    Ok(out)
}

/// Model predictions for one utterance: every segment evaluated in one
/// batch, unpadded frames concatenated per target.
pub fn predicted_traces<E: Elem>(
    model: &Model<E>,
    utt: &PreparedUtterance,
    kinds: &[TraceKind],
) -> Result<Vec<Vec<f64>>> {
    target_rows(kinds)?;
    if model.cfg.n_targets != kinds.len() {
        return Err(Error::ShapeMismatch {
            expected: format!("model with {} targets", kinds.len()),
            got: format!("{}", model.cfg.n_targets),
        });
    }
    if utt.segments.is_empty() {
        return Err(Error::Config(format!("utterance {} has no segments", utt.id)));
    }
    let n_segs = utt.segments.len();
    let (channels, frames) = utt.segments[0].spec.bins.dim();
    let mut x = Array3::<E>::zeros((n_segs, channels, frames));
    for (b, seg) in utt.segments.iter().enumerate() {
        for ((c, t), &v) in seg.spec.bins.indexed_iter() {
            x[(b, c, t)] = E::from_f64(v);
        }
    }
    let y = model.forward_eval(&x)?;
    let mut out = vec![Vec::with_capacity(utt.n_frames()); kinds.len()];
    for (b, seg) in utt.segments.iter().enumerate() {
        for (k, slot) in out.iter_mut().enumerate() {
            slot.extend(
                (0..seg.valid_frames).map(|t| y[(b, k, t)].to_f64()),
            );
        }
    }
    Ok(out)
}

/// Evaluation protocol over any prediction source: per-utterance PPMC
/// against ground truth per target, then mean/std over utterances.
pub fn evaluate_with<F>(
    predict: F,
    dataset: &PreparedDataset,
    utterance_ids: &[String],
    kinds: &[TraceKind],
    tag: &str,
) -> Result<EvalReport>
where
    F: Fn(&PreparedUtterance) -> Result<Vec<Vec<f64>>>,
{
    target_rows(kinds)?;
    if utterance_ids.is_empty() {
        return Err(Error::Config("no utterances to evaluate".into()));
    }
    let mut per_utterance = Vec::with_capacity(utterance_ids.len());
    for id in utterance_ids {
        let utt = dataset.utterance(id)?;
        let truth = truth_traces(utt, kinds)?;
        let pred = predict(utt)?;
        if pred.len() != kinds.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} predicted traces", kinds.len()),
                got: format!("{}", pred.len()),
            });
        }
        let mut scores = Vec::with_capacity(kinds.len());
        for (p, t) in pred.iter().zip(&truth) {
            scores.push(ppmc(p, t)?);
        }
        per_utterance.push(UtteranceScore {
            utterance_id: id.clone(),
            ppmc: scores,
        });
    }
    let targets = kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let column: Vec<f64> = per_utterance.iter().map(|u| u.ppmc[k]).collect();
            let (ppmc_mean, ppmc_std) = mean_std(&column);
            TargetEval {
                kind,
                ppmc_mean,
                ppmc_std,
            }
        })
        .collect();
    Ok(EvalReport {
        tag: tag.to_string(),
        targets,
        n_utterances: per_utterance.len(),
        per_utterance,
    })
}

/// Evaluates a trained model on the named utterances.
pub fn evaluate_model<E: Elem>(
    model: &Model<E>,
    dataset: &PreparedDataset,
    utterance_ids: &[String],
    kinds: &[TraceKind],
    tag: &str,
) -> Result<EvalReport> {
    evaluate_with(
        |utt| predicted_traces(model, utt, kinds),
        dataset,
        utterance_ids,
        kinds,
        tag,
    )
}

/// Moving-average span used before landmark detection.
pub const LANDMARK_SMOOTH_S: f64 = 0.05;
/// Peaks closer than this merge into the taller one.
const PEAK_MERGE_S: f64 = 0.1;
/// Onset/offset sit where |velocity| falls below this fraction of the
/// gesture's peak velocity.
const VELOCITY_FRACTION: f64 = 0.2;
/// Traces whose smoothed range is below this (relative to magnitude)
/// count as flat and produce no gestures.
const FLAT_RANGE_GUARD: f64 = 1e-12;
/// Gestures in two traces pair up only within this distance.
pub const PAIRING_WINDOW_S: f64 = 1.0;

/// One detected rise-fall movement in a trace.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Gesture {
    pub onset_s: f64,
    pub peak_s: f64,
    pub offset_s: f64,
    pub peak_value: f64,
}

impl Gesture {
    pub fn duration_s(&self) -> f64 {
        self.offset_s - self.onset_s
    }
}

/// Locates gestures in a trace: smoothed local maxima above the
/// half-range level are peaks (merged within 0.1 s), and each peak's
/// onset/offset sit at the nearest preceding/following frame where the
/// velocity magnitude drops below 20% of the stroke's peak velocity.
/// A flat trace yields no gestures; thresholds are relative, so any
/// positive affine rescaling of the trace moves no event by more than
/// one frame.
pub fn detect_landmarks(trace: &Trace) -> Result<Vec<Gesture>> {
    if trace.len() < 10 {
        return Err(Error::TooShort {
            len: trace.len(),
            min: 10,
        });
    }
    let w = ((LANDMARK_SMOOTH_S * trace.rate_hz).round() as usize).max(1);
    let smoothed = moving_average(&trace.as_signal(), WindowSpec::centered(w))?;
    let s = &smoothed.samples;
    let n = s.len();
    let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if range <= FLAT_RANGE_GUARD * hi.abs().max(lo.abs()).max(1.0) {
        return Ok(Vec::new());
    }
    let level = lo + 0.5 * range;

    // Local maxima within one contiguous above-level region are the
    // same gesture (plateau ripple), as are maxima closer than the
    // merge window; only a dip below the level separates gestures.
    let merge_gap = (PEAK_MERGE_S * trace.rate_hz).round() as usize;
    let mut peaks: Vec<usize> = Vec::new();
    for i in 1..n - 1 {
        if s[i] >= level && s[i] >= s[i - 1] && s[i] >= s[i + 1] {
            match peaks.last_mut() {
                Some(last)
                    if i - *last < merge_gap || s[*last..=i].iter().all(|&v| v >= level) =>
                {
                    if s[i] > s[*last] {
                        *last = i;
                    }
                }
                _ => peaks.push(i),
            }
        }
    }

    let mut velocity = vec![0.0f64; n];
    for i in 1..n - 1 {
        velocity[i] = (s[i + 1] - s[i - 1]) * trace.rate_hz / 2.0;
    }
    velocity[0] = (s[1] - s[0]) * trace.rate_hz;
    velocity[n - 1] = (s[n - 1] - s[n - 2]) * trace.rate_hz;

    let time_of = |i: usize| smoothed.t0_s + i as f64 / trace.rate_hz;
    let mut gestures = Vec::with_capacity(peaks.len());
    for (j, &peak) in peaks.iter().enumerate() {
        let left_bound = if j == 0 { 0 } else { peaks[j - 1] };
        let right_bound = if j + 1 == peaks.len() {
            n - 1
        } else {
            peaks[j + 1]
        };

        let mut up_at = peak;
        for i in left_bound..=peak {
            if velocity[i] > velocity[up_at] {
                up_at = i;
            }
        }
        let onset = if velocity[up_at] <= 0.0 {
            left_bound
        } else {
            let threshold = VELOCITY_FRACTION * velocity[up_at];
            let mut i = up_at;
            while i > left_bound && velocity[i] >= threshold {
                i -= 1;
            }
            i
        };

        let mut down_at = peak;
        for i in peak..=right_bound {
            if velocity[i] < velocity[down_at] {
                down_at = i;
            }
        }
        let offset = if velocity[down_at] >= 0.0 {
            right_bound
        } else {
            let threshold = VELOCITY_FRACTION * velocity[down_at];
            let mut i = down_at;
            while i < right_bound && velocity[i] <= threshold {
                i += 1;
            }
            i
        };

        gestures.push(Gesture {
            onset_s: time_of(onset),
            peak_s: time_of(peak),
            offset_s: time_of(offset),
            peak_value: s[peak],
        });
    }
    Ok(gestures)
}

/// CSV export of a gesture list: `gesture_index,kind,time_s`.
pub fn landmarks_csv(gestures: &[Gesture]) -> String {
    let mut out = String::from("gesture_index,kind,time_s\n");
    for (i, g) in gestures.iter().enumerate() {
        for (kind, t) in [("onset", g.onset_s), ("peak", g.peak_s), ("offset", g.offset_s)] {
            let _ = writeln!(out, "{i},{kind},{}", fmt_sig6(t));
        }
    }
    out
}

/// Signed timing lags between one gesture pair (a minus b throughout).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimingPair {
    pub a_index: usize,
    pub b_index: usize,
    pub onset_lag_s: f64,
    pub peak_lag_s: f64,
    pub offset_lag_s: f64,
    /// Gap from a's offset to b's onset, the sequencing-analysis lag.
    pub a_offset_to_b_onset_s: f64,
}

/// Pairs every gesture in `a` with its nearest-in-peak-time gesture in
/// `b` within [`PAIRING_WINDOW_S`], emitting signed lags.
pub fn relative_timing(a: &[Gesture], b: &[Gesture]) -> Vec<TimingPair> {
    let mut out = Vec::new();
    for (i, ga) in a.iter().enumerate() {
        let nearest = b
            .iter()
            .enumerate()
            .min_by(|(_, x), (_, y)| {
                (x.peak_s - ga.peak_s)
                    .abs()
                    .total_cmp(&(y.peak_s - ga.peak_s).abs())
            });
        if let Some((j, gb)) = nearest {
            if (gb.peak_s - ga.peak_s).abs() <= PAIRING_WINDOW_S {
                out.push(TimingPair {
                    a_index: i,
                    b_index: j,
                    onset_lag_s: ga.onset_s - gb.onset_s,
                    peak_lag_s: ga.peak_s - gb.peak_s,
                    offset_lag_s: ga.offset_s - gb.offset_s,
                    a_offset_to_b_onset_s: gb.onset_s - ga.offset_s,
                });
            }
        }
    }
    out
}
