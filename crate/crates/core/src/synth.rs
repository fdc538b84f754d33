//! Deterministic synthetic paired corpus: dual-mic audio, EGG, endoscopic
//! brightness, and ground-truth port-opening traces.
//!
//! Each utterance is rendered from a gesture script with a source-filter
//! scheme: a jittered glottal pulse train (or noise) drives two parallel
//! oral formant resonators and a fixed low nasal resonator with an
//! anti-resonance notch. A velopharyngeal opening curve `v(t)` built from
//! the script's targets gates energy between the two branches, so the
//! acoustics, the EGG, the brightness trace, and the ground truth all
//! move together by construction.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::io::{write_trace, write_wav};
use crate::physio::{Trace, TraceKind};
use crate::signal::Signal;
use crate::train::{ContrastTag, CorpusManifest, Sex, SpeakerRecord, UtteranceRecord};

/// Audio and EGG sample rate.
pub const SYNTH_RATE_HZ: f64 = 51_200.0;
/// Brightness trace rate.
pub const HSV_RATE_HZ: f64 = 1_000.0;
/// Ground-truth port-opening trace rate.
pub const TRUTH_RATE_HZ: f64 = 100.0;
/// Manifest file name inside a corpus directory.
pub const MANIFEST_FILE: &str = "manifest.json";

// Segment durations live on this grid so trace lengths divide evenly.
const DUR_GRID_S: f64 = 0.01;
// Shortest random script; keeps hsv-overlap validation possible for
// every synthesized utterance.
const MIN_SCRIPT_S: f64 = 1.4;
const MIN_UTT_S: f64 = 0.5;
const MAX_UTT_S: f64 = 12.0;
// Raised-cosine transition width between segment targets.
const TRANSITION_S: f64 = 0.08;

// Oral branch loses up to this fraction of amplitude at full opening.
const ORAL_DAMPING: f64 = 0.8;
// Each mic picks up this fraction of the other branch.
const CROSS_LEAK: f64 = 0.05;
// The narrowband nasal branch needs level makeup to rival the oral branch.
const NASAL_MAKEUP_GAIN: f64 = 2.0;
const NASAL_POLE_HZ: f64 = 280.0;
const NASAL_POLE_BW_HZ: f64 = 60.0;
const NASAL_NOTCH_HZ: f64 = 1_000.0;
const NASAL_NOTCH_BW_HZ: f64 = 300.0;
const F1_BW_HZ: f64 = 90.0;
const F2_BW_HZ: f64 = 120.0;

// Per-period pitch perturbation, as a fraction of the period.
const JITTER_FRAC: f64 = 0.03;
// Fractional f0 drop from utterance start to end.
const F0_DECLINATION: f64 = 0.10;
const PULSE_GAIN: f64 = 60.0;
const VOICED_NOISE_GAIN: f64 = 0.8;
const UNVOICED_NOISE_GAIN: f64 = 5.0;
const SOURCE_GAIN: f64 = 0.35;

const EGG_AMP: f64 = 0.8;
// Brightness at a fully open port; span added as the port closes.
const HSV_OPEN: f64 = 0.2;
const HSV_SPAN: f64 = 0.6;
const HSV_NOISE_SD: f64 = 0.02;

// RNG stream ids within one utterance seed.
const JITTER_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const HSV_STREAM: u64 = 3;

/// Per-speaker articulatory parameters, drawn once from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerProfile {
    pub f0_base_hz: f64,
    pub formant_scale: f64,
    pub nasal_coupling_gain: f64,
    pub seed: u64,
}

impl SpeakerProfile {
    /// Draws a profile. Sex picks the f0 and vocal-tract-length ranges.
    pub fn sample(seed: u64, sex: Sex) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (f0_lo, f0_hi, scale_lo, scale_hi) = match sex {
            Sex::Male => (95.0, 150.0, 0.85, 1.0),
            Sex::Female => (170.0, 225.0, 1.0, 1.15),
        };
        let f0_base_hz = rng.gen_range(f0_lo..=f0_hi);
        let formant_scale = rng.gen_range(scale_lo..=scale_hi);
        let nasal_coupling_gain = rng.gen_range(0.7..=1.0);
        SpeakerProfile {
            f0_base_hz,
            formant_scale,
            nasal_coupling_gain,
            seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Silence,
    OralVowel,
    OralConsonant,
    NasalConsonant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptSegment {
    pub kind: SegmentKind,
    pub duration_s: f64,
    /// Velopharyngeal opening target in [0, 1].
    pub vp_target: f64,
    pub voiced: bool,
}

impl ScriptSegment {
    pub fn new(kind: SegmentKind, duration_s: f64, vp_target: f64, voiced: bool) -> Self {
        ScriptSegment {
            kind,
            duration_s,
            vp_target,
            voiced,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureScript {
    pub segments: Vec<ScriptSegment>,
    pub contrast: ContrastTag,
}

impl GestureScript {
    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    /// Whole number of grid ticks per segment; errors off-grid scripts.
    fn grid_ticks(&self) -> Result<Vec<usize>> {
        if self.segments.is_empty() {
            return Err(Error::BadScript("script has no segments".into()));
        }
        let mut ticks = Vec::with_capacity(self.segments.len());
        for (i, seg) in self.segments.iter().enumerate() {
            if !seg.duration_s.is_finite() || seg.duration_s <= 0.0 {
                return Err(Error::BadScript(format!(
                    "segment {i} duration {} must be positive",
                    seg.duration_s
                )));
            }
            let k = (seg.duration_s / DUR_GRID_S).round();
            if k < 1.0 || (seg.duration_s - k * DUR_GRID_S).abs() > 1e-9 {
                return Err(Error::BadScript(format!(
                    "segment {i} duration {} is not on the {} s grid",
                    seg.duration_s, DUR_GRID_S
                )));
            }
            ticks.push(k as usize);
        }
        Ok(ticks)
    }

    pub fn validate(&self) -> Result<Vec<usize>> {
        let ticks = self.grid_ticks()?;
        for (i, seg) in self.segments.iter().enumerate() {
            if !(0.0..=1.0).contains(&seg.vp_target) || !seg.vp_target.is_finite() {
                return Err(Error::BadScript(format!(
                    "segment {i} vp_target {} outside [0, 1]",
                    seg.vp_target
                )));
            }
            if seg.kind == SegmentKind::Silence && (seg.voiced || seg.vp_target != 0.0) {
                return Err(Error::BadScript(format!(
                    "segment {i}: silence must be unvoiced with vp_target 0"
                )));
            }
        }
        let total = self.total_duration_s();
        if !(MIN_UTT_S - 1e-9..=MAX_UTT_S + 1e-9).contains(&total) {
            return Err(Error::BadScript(format!(
                "total duration {total} s outside [{MIN_UTT_S}, {MAX_UTT_S}]"
            )));
        }
        Ok(ticks)
    }
}

fn seg(kind: SegmentKind, duration_s: f64, vp: f64, voiced: bool) -> ScriptSegment {
    ScriptSegment::new(kind, duration_s, vp, voiced)
}

/// CVVNC-style item with the nasal in the rime (long closure).
pub fn rime_nasal_script() -> GestureScript {
    use SegmentKind::*;
    GestureScript {
        segments: vec![
            seg(Silence, 0.12, 0.0, false),
            seg(OralConsonant, 0.10, 0.0, false),
            seg(OralVowel, 0.30, 0.0, true),
            seg(NasalConsonant, 0.36, 1.0, true),
            seg(OralVowel, 0.24, 0.0, true),
            seg(Silence, 0.18, 0.0, false),
        ],
        contrast: ContrastTag::RimeNasal,
    }
}

/// Matched item with the nasal in onset position (short closure).
pub fn onset_nasal_script() -> GestureScript {
    use SegmentKind::*;
    GestureScript {
        segments: vec![
            seg(Silence, 0.12, 0.0, false),
            seg(OralConsonant, 0.10, 0.0, false),
            seg(OralVowel, 0.36, 0.0, true),
            seg(NasalConsonant, 0.18, 1.0, true),
            seg(OralVowel, 0.36, 0.0, true),
            seg(Silence, 0.18, 0.0, false),
        ],
        contrast: ContrastTag::OnsetNasal,
    }
}

fn grid_dur(rng: &mut ChaCha8Rng, lo_ticks: usize, hi_ticks: usize) -> f64 {
    rng.gen_range(lo_ticks..=hi_ticks) as f64 * DUR_GRID_S
}

/// Random vowel-consonant alternation with at least one nasal segment.
pub fn random_script(rng: &mut ChaCha8Rng) -> GestureScript {
    use SegmentKind::*;
    let mut segments = vec![seg(Silence, grid_dur(rng, 10, 20), 0.0, false)];
    let n_vowels = rng.gen_range(2..=4usize);
    let mut consonant_slots = Vec::new();
    for v in 0..n_vowels {
        segments.push(seg(OralVowel, grid_dur(rng, 20, 45), 0.0, true));
        if v + 1 < n_vowels {
            let dur = grid_dur(rng, 12, 30);
            if rng.gen_bool(0.6) {
                let vp = rng.gen_range(70..=100u32) as f64 / 100.0;
                segments.push(seg(NasalConsonant, dur, vp, true));
            } else {
                let voiced = rng.gen_bool(0.4);
                consonant_slots.push(segments.len());
                segments.push(seg(OralConsonant, dur, 0.0, voiced));
            }
        }
    }
    let has_nasal = segments.iter().any(|s| s.kind == NasalConsonant);
    if !has_nasal {
        let slot = consonant_slots[rng.gen_range(0..consonant_slots.len())];
        segments[slot] = seg(NasalConsonant, segments[slot].duration_s, 0.85, true);
    }
    segments.push(seg(Silence, grid_dur(rng, 10, 20), 0.0, false));
    // Endoscopy validation needs a 1 s trace overlap; stretching the
    // shortest vowel keeps every utterance comfortably above that.
    loop {
        let total: f64 = segments.iter().map(|s| s.duration_s).sum();
        if total >= MIN_SCRIPT_S {
            break;
        }
        let shortest = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.kind == SegmentKind::OralVowel)
            .min_by(|(_, a), (_, b)| a.duration_s.total_cmp(&b.duration_s))
            .map(|(i, _)| i)
            .expect("script has vowels");
        segments[shortest].duration_s += 10.0 * DUR_GRID_S;
    }
    GestureScript {
        segments,
        contrast: ContrastTag::None,
    }
}

/// Everything one synthesized utterance produces.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub oral: Signal,
    pub nasal: Signal,
    pub egg: Signal,
    pub hsv: Trace,
    pub vp_truth: Trace,
}

// Segment-kind formant targets before speaker scaling.
fn formant_targets(kind: SegmentKind) -> (f64, f64) {
    match kind {
        SegmentKind::Silence => (500.0, 1500.0),
        SegmentKind::OralVowel => (700.0, 1200.0),
        SegmentKind::OralConsonant => (380.0, 1700.0),
        SegmentKind::NasalConsonant => (450.0, 1400.0),
    }
}

/// Step targets smoothed with raised-cosine crossfades at boundaries.
/// Transition half-width shrinks to fit short neighbors so crossfades
/// never overlap.
fn smooth_piecewise(values: &[f64], bounds: &[usize], trans_samples: f64) -> Vec<f64> {
    let n = *bounds.last().expect("non-empty bounds");
    let mut out = Vec::with_capacity(n);
    for j in 0..values.len() {
        out.extend(std::iter::repeat_n(values[j], bounds[j + 1] - bounds[j]));
    }
    for j in 1..values.len() {
        let b = bounds[j] as f64;
        let left = (bounds[j] - bounds[j - 1]) as f64 / 2.0;
        let right = (bounds[j + 1] - bounds[j]) as f64 / 2.0;
        let h = (trans_samples / 2.0).min(left).min(right);
        if h < 1.0 {
            continue;
        }
        let (lo, hi) = ((b - h).ceil() as usize, ((b + h).floor() as usize).min(n));
        let (va, vb) = (values[j - 1], values[j]);
        for (i, slot) in out.iter_mut().enumerate().take(hi).skip(lo) {
            let x = (i as f64 - (b - h)) / (2.0 * h);
            let w = 0.5 * (1.0 - (PI * x.clamp(0.0, 1.0)).cos());
            *slot = va + (vb - va) * w;
        }
    }
    out
}

// Two-pole resonator, numerator normalized for unit gain at the pole
// frequency; center frequency may vary per sample.
struct Resonator {
    rate_hz: f64,
    r: f64,
    y1: f64,
    y2: f64,
}

impl Resonator {
    fn new(rate_hz: f64, bw_hz: f64) -> Self {
        Resonator {
            rate_hz,
            r: (-PI * bw_hz / rate_hz).exp(),
            y1: 0.0,
            y2: 0.0,
        }
    }

    fn step(&mut self, x: f64, f_hz: f64) -> f64 {
        let w = 2.0 * PI * f_hz / self.rate_hz;
        let (sin_w, cos_w) = w.sin_cos();
        let (sin_2w, cos_2w) = (2.0 * w).sin_cos();
        let a1 = -2.0 * self.r * cos_w;
        let a2 = self.r * self.r;
        let re = 1.0 + a1 * cos_w + a2 * cos_2w;
        let im = -(a1 * sin_w + a2 * sin_2w);
        let b0 = (re * re + im * im).sqrt();
        let y = b0 * x - a1 * self.y1 - a2 * self.y2;
        self.y2 = self.y1;
        self.y1 = y;
        y
    }
}

// Fixed-frequency notch with unit DC gain.
struct Notch {
    b: [f64; 3],
    a1: f64,
    a2: f64,
    z1: f64,
    z2: f64,
}

impl Notch {
    fn new(rate_hz: f64, f_hz: f64, bw_hz: f64) -> Self {
        let w = 2.0 * PI * f_hz / rate_hz;
        let r = (-PI * bw_hz / rate_hz).exp();
        let cos_w = w.cos();
        let (a1, a2) = (-2.0 * r * cos_w, r * r);
        let b_raw = [1.0, -2.0 * cos_w, 1.0];
        let dc = (1.0 + a1 + a2) / (b_raw[0] + b_raw[1] + b_raw[2]);
        Notch {
            b: [b_raw[0] * dc, b_raw[1] * dc, b_raw[2] * dc],
            a1,
            a2,
            z1: 0.0,
            z2: 0.0,
        }
    }

    fn step(&mut self, x: f64) -> f64 {
        let y = self.b[0] * x + self.z1;
        self.z1 = self.b[1] * x - self.a1 * y + self.z2;
        self.z2 = self.b[2] * x - self.a2 * y;
        y
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn randn(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Renders one utterance. The same profile, script, and seed always
/// produce bit-identical output.
pub fn synthesize_utterance(
    profile: &SpeakerProfile,
    script: &GestureScript,
    seed: u64,
) -> Result<SynthOutput> {
    let ticks = script.validate()?;
    let samples_per_tick = (SYNTH_RATE_HZ * DUR_GRID_S) as usize;
    let mut bounds = vec![0usize];
    for k in &ticks {
        bounds.push(bounds.last().unwrap() + k * samples_per_tick);
    }
    let n = *bounds.last().unwrap();
    let total_ticks: usize = ticks.iter().sum();

    let per_seg = |f: &dyn Fn(&ScriptSegment) -> f64| -> Vec<f64> {
        script.segments.iter().map(f).collect()
    };
    let trans = TRANSITION_S * SYNTH_RATE_HZ;
    let vp = smooth_piecewise(&per_seg(&|s| s.vp_target), &bounds, trans);
    let amp = smooth_piecewise(
        &per_seg(&|s| if s.kind == SegmentKind::Silence { 0.0 } else { 1.0 }),
        &bounds,
        trans,
    );
    let vfrac = smooth_piecewise(
        &per_seg(&|s| if s.voiced { 1.0 } else { 0.0 }),
        &bounds,
        trans,
    );
    let scale = profile.formant_scale;
    let f1 = smooth_piecewise(&per_seg(&|s| formant_targets(s.kind).0 * scale), &bounds, trans);
    let f2 = smooth_piecewise(&per_seg(&|s| formant_targets(s.kind).1 * scale), &bounds, trans);

    let f0_at = |i: usize| -> f64 {
        let frac = i as f64 / n as f64;
        profile.f0_base_hz * (1.0 + F0_DECLINATION * (0.5 - frac))
    };

    // Glottal pulse placement with per-period jitter.
    let mut pulses = vec![0.0f64; n];
    let mut jitter_rng = stream_rng(seed, JITTER_STREAM);
    let mut tp = 0.0f64;
    loop {
        let idx = (tp * SYNTH_RATE_HZ).round() as usize;
        if idx >= n {
            break;
        }
        pulses[idx] += PULSE_GAIN;
        let f = f0_at(idx);
        let jitter = 1.0 + JITTER_FRAC * (2.0 * jitter_rng.gen::<f64>() - 1.0);
        tp += jitter / f;
    }

    let mut noise_rng = stream_rng(seed, NOISE_STREAM);
    let mut res1 = Resonator::new(SYNTH_RATE_HZ, F1_BW_HZ);
    let mut res2 = Resonator::new(SYNTH_RATE_HZ, F2_BW_HZ);
    let mut res_nasal = Resonator::new(SYNTH_RATE_HZ, NASAL_POLE_BW_HZ);
    let mut notch = Notch::new(SYNTH_RATE_HZ, NASAL_NOTCH_HZ, NASAL_NOTCH_BW_HZ);

    let coupling = profile.nasal_coupling_gain;
    let mut oral = vec![0.0f64; n];
    let mut nasal = vec![0.0f64; n];
    let mut egg = vec![0.0f64; n];
    let mut phase = 0.0f64;
    for i in 0..n {
        let wn = 2.0 * noise_rng.gen::<f64>() - 1.0;
        let voiced_src = pulses[i] + VOICED_NOISE_GAIN * wn;
        let unvoiced_src = UNVOICED_NOISE_GAIN * wn;
        let src = SOURCE_GAIN
            * amp[i]
            * (vfrac[i] * voiced_src + (1.0 - vfrac[i]) * unvoiced_src);

        let oral_branch = res1.step(src, f1[i]) + res2.step(src, f2[i]);
        let nasal_branch =
            NASAL_MAKEUP_GAIN * notch.step(res_nasal.step(src, NASAL_POLE_HZ));

        let oral_eff = (1.0 - ORAL_DAMPING * vp[i]) * oral_branch;
        let nasal_eff = coupling * vp[i] * nasal_branch;
        oral[i] = oral_eff + CROSS_LEAK * nasal_eff;
        nasal[i] = nasal_eff + CROSS_LEAK * oral_eff;

        let f = f0_at(i);
        phase += f / SYNTH_RATE_HZ;
        egg[i] = EGG_AMP * amp[i] * vfrac[i] * (2.0 * PI * phase).sin();
    }

    let mut hsv_rng = stream_rng(seed, HSV_STREAM);
    let n_hsv = total_ticks * (HSV_RATE_HZ * DUR_GRID_S) as usize;
    let mut hsv = Vec::with_capacity(n_hsv);
    let step = SYNTH_RATE_HZ / HSV_RATE_HZ;
    for j in 0..n_hsv {
        let idx = ((j as f64 * step).round() as usize).min(n - 1);
        let v = HSV_OPEN + HSV_SPAN * (1.0 - vp[idx]) + HSV_NOISE_SD * randn(&mut hsv_rng);
        hsv.push(v.clamp(0.0, 1.0));
    }

    // Ground truth samples the opening curve at nasalance frame centers.
    let frame = (SYNTH_RATE_HZ / TRUTH_RATE_HZ) as usize;
    let vp_truth: Vec<f64> = (0..total_ticks).map(|i| vp[i * frame + frame / 2]).collect();

    Ok(SynthOutput {
        oral: Signal::new(oral, SYNTH_RATE_HZ),
        nasal: Signal::new(nasal, SYNTH_RATE_HZ),
        egg: Signal::new(egg, SYNTH_RATE_HZ),
        hsv: Trace::new(hsv, HSV_RATE_HZ, 0.0, TraceKind::HsvIntensity),
        vp_truth: Trace::new(
            vp_truth,
            TRUTH_RATE_HZ,
            frame as f64 / 2.0 / SYNTH_RATE_HZ,
            TraceKind::PortOpening,
        ),
    })
}

// SplitMix64 round, used to derive independent sub-seeds.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One utterance in a corpus plan.
#[derive(Debug, Clone)]
pub struct PlannedUtterance {
    pub id: String,
    pub speaker_id: String,
    pub script: GestureScript,
    pub seed: u64,
}

/// Deterministic corpus layout: speakers alternate female/male, the
/// first two utterances of every speaker are the matched nasal-position
/// contrast pair, and the rest are seeded random scripts.
pub fn plan_corpus(
    n_speakers: usize,
    utterances_per_speaker: usize,
    seed: u64,
) -> Result<Vec<(SpeakerRecord, SpeakerProfile, Vec<PlannedUtterance>)>> {
    if n_speakers < 3 {
        return Err(Error::Config(format!(
            "need at least 3 speakers, got {n_speakers}"
        )));
    }
    if utterances_per_speaker < 2 {
        return Err(Error::Config(format!(
            "need at least 2 utterances per speaker for the contrast pair, got {utterances_per_speaker}"
        )));
    }
    let mut plan = Vec::with_capacity(n_speakers);
    for s in 0..n_speakers {
        let sex = if s % 2 == 0 { Sex::Female } else { Sex::Male };
        let profile_seed = mix_seed(seed, 0xA110_0000 + s as u64);
        let profile = SpeakerProfile::sample(profile_seed, sex);
        let speaker_id = format!("spk{s:02}");
        let mut utts = Vec::with_capacity(utterances_per_speaker);
        for u in 0..utterances_per_speaker {
            let utt_seed = mix_seed(seed, ((s as u64) << 32) | (u as u64 + 1));
            let script = match u {
                0 => rime_nasal_script(),
                1 => onset_nasal_script(),
                _ => random_script(&mut stream_rng(utt_seed, 0)),
            };
            utts.push(PlannedUtterance {
                id: format!("{speaker_id}_utt{u:02}"),
                speaker_id: speaker_id.clone(),
                script,
                seed: utt_seed,
            });
        }
        plan.push((
            SpeakerRecord {
                id: speaker_id,
                sex,
                profile_seed,
            },
            profile,
            utts,
        ));
    }
    Ok(plan)
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    Ok(hex)
}

/// Manifest-listed files that are missing from `dir` or whose content
/// no longer matches the recorded hash. Empty means the corpus on disk
/// is exactly what the manifest describes.
pub fn stale_corpus_files(dir: &Path, manifest: &CorpusManifest) -> Vec<String> {
    manifest
        .file_hashes
        .iter()
        .filter(|(name, want)| {
            !matches!(sha256_file(&dir.join(name.as_str())), Ok(have) if have == **want)
        })
        .map(|(name, _)| name.clone())
        .collect()
}

/// Synthesizes the full corpus into `out_dir` and writes its manifest.
/// Rerunning with the same arguments rewrites byte-identical files.
pub fn build_corpus(
    out_dir: &Path,
    n_speakers: usize,
    utterances_per_speaker: usize,
    seed: u64,
) -> Result<CorpusManifest> {
    let plan = plan_corpus(n_speakers, utterances_per_speaker, seed)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let mut speakers = Vec::new();
    let mut utterances = Vec::new();
    let mut file_hashes = BTreeMap::new();
    for (record, profile, utts) in plan {
        for planned in utts {
            let out = synthesize_utterance(&profile, &planned.script, planned.seed)?;
            let id = &planned.id;
            let files = [
                (format!("{id}_oral.wav"), FileBody::Wav(&out.oral)),
                (format!("{id}_nasal.wav"), FileBody::Wav(&out.nasal)),
                (format!("{id}_egg.wav"), FileBody::Wav(&out.egg)),
                (format!("{id}_hsv.csv"), FileBody::Trace(&out.hsv)),
                (format!("{id}_vp.csv"), FileBody::Trace(&out.vp_truth)),
            ];
            for (name, body) in &files {
                let path = out_dir.join(name);
                match body {
                    FileBody::Wav(signal) => write_wav(&path, signal)?,
                    FileBody::Trace(trace) => write_trace(&path, trace)?,
                }
                file_hashes.insert(name.clone(), sha256_file(&path)?);
            }
            utterances.push(UtteranceRecord {
                id: planned.id.clone(),
                speaker_id: planned.speaker_id.clone(),
                oral_path: files[0].0.clone(),
                nasal_path: files[1].0.clone(),
                egg_path: files[2].0.clone(),
                hsv_path: Some(files[3].0.clone()),
                vp_path: Some(files[4].0.clone()),
                duration_s: out.oral.duration_s(),
                contrast: planned.script.contrast,
            });
        }
        speakers.push(record);
    }

    let manifest = CorpusManifest {
        seed,
        n_speakers,
        utterances_per_speaker,
        speakers,
        utterances,
        file_hashes,
    };
    crate::io::write_manifest(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

enum FileBody<'a> {
    Wav(&'a Signal),
    Trace(&'a Trace),
}
