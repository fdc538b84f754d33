//! Speaker-independent dataset splitting, the optimization loop, and
//! multi-trial experiment orchestration.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use ndarray::Array3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{PreparedDataset, PreparedSegment};
use crate::error::{Error, Result};
use crate::eval::{evaluate_model, mean_std, EvalReport};
use crate::physio::TraceKind;
use crate::synth::mix_seed;
use crate::tcn::{adam_update, build_model, masked_mse, AdamState, Elem, Model, ModelConfig, Precision, Tensor3};

/// Speaker sex, used to balance held-out speaker selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sex {
    Female,
    Male,
}

/// Which prosodic contrast an utterance's script realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastTag {
    RimeNasal,
    OnsetNasal,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerRecord {
    pub id: String,
    pub sex: Sex,
    pub profile_seed: u64,
}

/// One recorded (or synthesized) utterance. Paths are relative to the
/// manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker_id: String,
    pub oral_path: String,
    pub nasal_path: String,
    pub egg_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hsv_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vp_path: Option<String>,
    pub duration_s: f64,
    pub contrast: ContrastTag,
}

/// Corpus description driving training and evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusManifest {
    pub seed: u64,
    pub n_speakers: usize,
    pub utterances_per_speaker: usize,
    pub speakers: Vec<SpeakerRecord>,
    pub utterances: Vec<UtteranceRecord>,
    /// SHA-256 of every generated file, keyed by relative path; lets a
    /// rebuild verify outputs without regenerating them.
    #[serde(default)]
    pub file_hashes: BTreeMap<String, String>,
}

impl CorpusManifest {
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        let speaker_ids: BTreeSet<&str> = self.speakers.iter().map(|s| s.id.as_str()).collect();
        if speaker_ids.len() != self.speakers.len() {
            return Err(Error::Config("duplicate speaker ids in manifest".into()));
        }
        for u in &self.utterances {
            if !ids.insert(u.id.as_str()) {
                return Err(Error::Config(format!("duplicate utterance id {:?}", u.id)));
            }
            if !speaker_ids.contains(u.speaker_id.as_str()) {
                return Err(Error::UnknownSpeaker(u.speaker_id.clone()));
            }
        }
        Ok(())
    }

    pub fn speaker(&self, id: &str) -> Result<&SpeakerRecord> {
        self.speakers
            .iter()
            .find(|s| s.id == id)
            .ok_or_else(|| Error::UnknownSpeaker(id.to_string()))
    }

    pub fn utterance(&self, id: &str) -> Result<&UtteranceRecord> {
        self.utterances
            .iter()
            .find(|u| u.id == id)
            .ok_or_else(|| Error::UnknownUtterance(id.to_string()))
    }
}

/// Utterance-id assignment into train/val/test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub seed: u64,
}

// Train must hold 70% of utterances within this many percentage points.
const TRAIN_FRACTION_TARGET: f64 = 0.70;
const TRAIN_FRACTION_SLACK: f64 = 0.05;
// Seeded retries before giving up on the fraction window.
const SPLIT_ATTEMPTS: usize = 1000;

/// Speaker-independent split: a seeded speaker shuffle assigns whole
/// speakers to train, the rest are held out, and each held-out
/// speaker's utterances are halved between val and test. Retries the
/// shuffle until the train fraction lands in the 70% +/- 5 pt window
/// and, when both sexes exist and at least two speakers are held out,
/// the held-out set contains both sexes.
pub fn make_splits(
    manifest: &CorpusManifest,
    n_train_speakers: usize,
    seed: u64,
) -> Result<SplitManifest> {
    manifest.validate()?;
    let n_speakers = manifest.speakers.len();
    if n_train_speakers == 0 {
        return Err(Error::BadSplit("need at least one training speaker".into()));
    }
    if n_speakers < n_train_speakers + 1 {
        return Err(Error::BadSplit(format!(
            "need at least {} speakers to hold one out, got {n_speakers}",
            n_train_speakers + 1
        )));
    }
    let mut by_speaker: HashMap<&str, Vec<&str>> = HashMap::new();
    for u in &manifest.utterances {
        by_speaker
            .entry(u.speaker_id.as_str())
            .or_default()
            .push(u.id.as_str());
    }
    let total_utts = manifest.utterances.len();
    if total_utts == 0 {
        return Err(Error::BadSplit("manifest has no utterances".into()));
    }
    let sexes: BTreeSet<Sex> = manifest.speakers.iter().map(|s| s.sex).collect();
    let want_both_sexes = sexes.len() == 2 && n_speakers - n_train_speakers >= 2;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut speaker_ids: Vec<&str> = manifest.speakers.iter().map(|s| s.id.as_str()).collect();
    for _ in 0..SPLIT_ATTEMPTS {
        speaker_ids.shuffle(&mut rng);
        let (train_spk, held_spk) = speaker_ids.split_at(n_train_speakers);
        if want_both_sexes {
            let held_sexes: BTreeSet<Sex> = held_spk
                .iter()
                .map(|id| manifest.speaker(id).expect("validated").sex)
                .collect();
            if held_sexes.len() < 2 {
                continue;
            }
        }
        let train_count: usize = train_spk
            .iter()
            .map(|id| by_speaker.get(id).map_or(0, Vec::len))
            .sum();
        let fraction = train_count as f64 / total_utts as f64;
        if !(TRAIN_FRACTION_TARGET - TRAIN_FRACTION_SLACK - 1e-9..=TRAIN_FRACTION_TARGET + TRAIN_FRACTION_SLACK + 1e-9).contains(&fraction)
        {
            continue;
        }
        let mut train: Vec<String> = Vec::with_capacity(train_count);
        for id in train_spk {
            if let Some(utts) = by_speaker.get(id) {
                train.extend(utts.iter().map(|s| s.to_string()));
            }
        }
        let mut val = Vec::new();
        let mut test = Vec::new();
        for id in held_spk {
            let Some(utts) = by_speaker.get(id) else {
                continue;
            };
            let mut utts: Vec<&str> = utts.clone();
            utts.shuffle(&mut rng);
            let mut take_val = utts.len() / 2;
            if utts.len() % 2 == 1 && rng.gen::<bool>() {
                take_val += 1;
            }
            val.extend(utts[..take_val].iter().map(|s| s.to_string()));
            test.extend(utts[take_val..].iter().map(|s| s.to_string()));
        }
        if train.is_empty() || val.is_empty() || test.is_empty() {
            continue;
        }
        train.sort_unstable();
        val.sort_unstable();
        test.sort_unstable();
        return Ok(SplitManifest {
            train,
            val,
            test,
            seed,
        });
    }
    Err(Error::SplitSearchExhausted {
        attempts: SPLIT_ATTEMPTS,
    })
}

/// Which physiological parameters the network estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSet {
    /// Nasalance alone; the "SI-noSF" condition.
    NasalanceOnly,
    /// Nasalance plus the four source features; the "SI-SF" condition.
    WithSourceFeatures,
}

impl TargetSet {
    pub fn kinds(self) -> &'static [TraceKind] {
        match self {
            TargetSet::NasalanceOnly => &TraceKind::TARGETS[..1],
            TargetSet::WithSourceFeatures => &TraceKind::TARGETS,
        }
    }

    pub fn n_targets(self) -> usize {
        self.kinds().len()
    }

    /// Condition label used in reports and checkpoints.
    pub fn tag(self) -> &'static str {
        match self {
            TargetSet::NasalanceOnly => "SI-noSF",
            TargetSet::WithSourceFeatures => "SI-SF",
        }
    }
}

/// Optimization and experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Per-epoch learning-rate decay factor.
    pub lr_gamma: f64,
    pub batch_size: usize,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub targets: TargetSet,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            lr_gamma: 0.9,
            batch_size: 64,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            max_epochs: 100,
            patience: 10,
            n_trials: 8,
            seed: 7,
            targets: TargetSet::WithSourceFeatures,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadTrainConfig(msg));
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !self.lr_gamma.is_finite() || self.lr_gamma <= 0.0 || self.lr_gamma > 1.0 {
            return bad(format!("lr_gamma must be in (0, 1], got {}", self.lr_gamma));
        }
        if self.batch_size < 2 {
            return bad(format!(
                "batch_size must be at least 2 for batch statistics, got {}",
                self.batch_size
            ));
        }
        for (name, beta) in [("adam_betas.0", self.adam_betas.0), ("adam_betas.1", self.adam_betas.1)] {
            if !beta.is_finite() || !(0.0..1.0).contains(&beta) {
                return bad(format!("{name} must be in [0, 1), got {beta}"));
            }
        }
        if !self.adam_eps.is_finite() || self.adam_eps <= 0.0 {
            return bad(format!("adam_eps must be positive, got {}", self.adam_eps));
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1".into());
        }
        Ok(())
    }

    /// Learning rate for a zero-based epoch index.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.lr_gamma.powi(epoch as i32)
    }
}

/// One epoch's summary line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub lr: f64,
}

/// A finished optimization run. `best_blobs` snapshots the parameters
/// and batch-norm running statistics of the best validation epoch.
#[derive(Debug, Clone)]
pub struct TrainResult {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub best_blobs: Vec<(String, Vec<f32>)>,
}

/// CSV rendering of a training history, full float precision.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,val_loss,lr\n");
    for e in history {
        let _ = writeln!(out, "{},{},{},{}", e.epoch, e.train_loss, e.val_loss, e.lr);
    }
    out
}

/// Shuffled batch index plan. Every chunk keeps `batch_size` segments
/// except the last, which keeps the remainder; a remainder of one is
/// folded into the previous chunk so batch statistics stay defined.
fn plan_batches(n: usize, batch_size: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut chunks: Vec<Vec<usize>> = order.chunks(batch_size).map(<[usize]>::to_vec).collect();
    if chunks.len() >= 2 && chunks.last().is_some_and(|c| c.len() == 1) {
        let solo = chunks.pop().expect("checked non-empty");
        chunks.last_mut().expect("len >= 2").extend(solo);
    }
    chunks
}

/// Packs segments into input/target tensors plus per-example valid
/// frame counts. `rows` selects target matrix rows in output order.
fn batch_tensors<E: Elem>(
    segs: &[&PreparedSegment],
    picks: &[usize],
    rows: &[usize],
) -> (Tensor3<E>, Tensor3<E>, Vec<usize>) {
    let (channels, frames) = segs[picks[0]].spec.bins.dim();
    let t_len = segs[picks[0]].targets.ncols();
    let mut x = Array3::zeros((picks.len(), channels, frames));
    let mut y = Array3::zeros((picks.len(), rows.len(), t_len));
    let mut valid = Vec::with_capacity(picks.len());
    for (i, &pick) in picks.iter().enumerate() {
        let seg = segs[pick];
        for ((c, t), &v) in seg.spec.bins.indexed_iter() {
            x[(i, c, t)] = E::from_f64(v);
        }
        for (k, &row) in rows.iter().enumerate() {
            for t in 0..t_len {
                y[(i, k, t)] = E::from_f64(seg.targets[(row, t)]);
            }
        }
        valid.push(seg.valid_frames);
    }
    (x, y, valid)
}

fn target_rows(targets: TargetSet) -> Vec<usize> {
    targets
        .kinds()
        .iter()
        .map(|k| k.target_row().expect("target sets only name network targets"))
        .collect()
}

/// Masked MSE of a model in inference mode over a segment list.
fn eval_loss<E: Elem>(
    model: &Model<E>,
    segs: &[&PreparedSegment],
    rows: &[usize],
    batch_size: usize,
) -> Result<f64> {
    let mut weighted = 0.0;
    let mut weight = 0.0;
    let all: Vec<usize> = (0..segs.len()).collect();
    for picks in all.chunks(batch_size) {
        let (x, y, valid) = batch_tensors::<E>(segs, picks, rows);
        let pred = model.forward_eval(&x)?;
        let (loss, _) = masked_mse(&pred, &y, &valid)?;
        let w: usize = valid.iter().sum();
        weighted += loss * w as f64;
        weight += w as f64;
    }
    Ok(weighted / weight)
}

/// Runs the optimization loop: seeded epoch shuffles, Adam updates at
/// an exponentially decaying learning rate, and early stopping on
/// validation loss. The model is left holding the best-epoch weights,
/// which `best_blobs` also snapshots. Single-threaded and bitwise
/// deterministic for fixed inputs and seeds.
pub fn train<E: Elem>(
    model: &mut Model<E>,
    train_segs: &[&PreparedSegment],
    val_segs: &[&PreparedSegment],
    cfg: &TrainConfig,
    shuffle_seed: u64,
) -> Result<TrainResult> {
    cfg.validate()?;
    if train_segs.len() < 2 {
        return Err(Error::BadSplit(format!(
            "need at least 2 training segments, got {}",
            train_segs.len()
        )));
    }
    if val_segs.is_empty() {
        return Err(Error::BadSplit("validation set is empty".into()));
    }
    let rows = target_rows(cfg.targets);
    if model.cfg.n_targets != rows.len() {
        return Err(Error::BadTrainConfig(format!(
            "model predicts {} targets but the target set has {}",
            model.cfg.n_targets,
            rows.len()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    let mut adam = AdamState::new();
    let mut history = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val_loss = f64::INFINITY;
    let mut best_blobs: Vec<(String, Vec<f32>)> = Vec::new();
    let mut stale_epochs = 0usize;

    for epoch in 0..cfg.max_epochs {
        let lr = cfg.lr_at(epoch);
        let mut weighted = 0.0;
        let mut weight = 0.0;
        for picks in plan_batches(train_segs.len(), cfg.batch_size, &mut rng) {
            let (x, y, valid) = batch_tensors::<E>(train_segs, &picks, &rows);
            model.zero_grad();
            let pred = model.forward_train(&x)?;
            let (loss, grad) = masked_mse(&pred, &y, &valid)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteTraining {
                    what: "training loss",
                    epoch,
                });
            }
            model.backward(&grad)?;
            adam_update(model, &mut adam, lr, cfg.adam_betas, cfg.adam_eps)?;
            let w: usize = valid.iter().sum();
            weighted += loss * w as f64;
            weight += w as f64;
        }
        let train_loss = weighted / weight;
        let val_loss = eval_loss(model, val_segs, &rows, cfg.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteTraining {
                what: "validation loss",
                epoch,
            });
        }
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            lr,
        });
        if val_loss < best_val_loss {
            best_val_loss = val_loss;
            best_epoch = epoch;
            best_blobs = model.export_blobs();
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    let by_name: HashMap<String, Vec<f32>> = best_blobs.iter().cloned().collect();
    model.import_blobs(&by_name)?;
    Ok(TrainResult {
        history,
        best_epoch,
        best_val_loss,
        best_blobs,
    })
}

/// One train-and-evaluate repetition inside an experiment.
#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub trial: usize,
    pub model_seed: u64,
    pub result: TrainResult,
    pub report: EvalReport,
}

/// Per-target column of a multi-trial summary.
#[derive(Debug, Clone, Serialize)]
pub struct TrialColumn {
    pub kind: TraceKind,
    pub mean: f64,
    pub std: f64,
}

/// Aggregate of repeated trials: per-target mean and population std of
/// the per-trial test PPMC means, plus the across-target average.
#[derive(Debug, Clone)]
pub struct TrialReport {
    pub tag: String,
    pub columns: Vec<TrialColumn>,
    pub average_mean: f64,
    pub average_std: f64,
    pub trials: Vec<TrialOutcome>,
}

// Distinguishes batch-shuffle streams from model-init streams.
const SHUFFLE_SALT: u64 = 0x5EED_BA7C;

fn run_one_trial<E: Elem>(
    dataset: &PreparedDataset,
    split: &SplitManifest,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
    train_segs: &[&PreparedSegment],
    val_segs: &[&PreparedSegment],
    shuffle_seed: u64,
) -> Result<(TrainResult, EvalReport)> {
    let mut model = build_model::<E>(model_cfg)?;
    let result = train(&mut model, train_segs, val_segs, cfg, shuffle_seed)?;
    let report = evaluate_model(
        &model,
        dataset,
        &split.test,
        cfg.targets.kinds(),
        cfg.targets.tag(),
    )?;
    Ok((result, report))
}

/// Repeats training `n_trials` times on one fixed split, varying only
/// the model initialization and batch shuffling seeds, and aggregates
/// held-out test agreement across trials.
pub fn run_trials(
    dataset: &PreparedDataset,
    split: &SplitManifest,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<TrialReport> {
    cfg.validate()?;
    model_cfg.validate()?;
    if model_cfg.n_targets != cfg.targets.n_targets() {
        return Err(Error::BadTrainConfig(format!(
            "model config has {} targets but the target set {} needs {}",
            model_cfg.n_targets,
            cfg.targets.tag(),
            cfg.targets.n_targets()
        )));
    }
    let train_segs = dataset.segments_for(&split.train)?;
    let val_segs = dataset.segments_for(&split.val)?;

    let mut trials = Vec::with_capacity(cfg.n_trials);
    for trial in 0..cfg.n_trials {
        let model_seed = cfg.seed.wrapping_add(trial as u64);
        let shuffle_seed = mix_seed(model_seed, SHUFFLE_SALT);
        let trial_cfg = ModelConfig {
            seed: model_seed,
            ..model_cfg.clone()
        };
        let (result, report) = match trial_cfg.precision {
            Precision::F32 => run_one_trial::<f32>(
                dataset, split, &trial_cfg, cfg, &train_segs, &val_segs, shuffle_seed,
            )?,
            Precision::F64 => run_one_trial::<f64>(
                dataset, split, &trial_cfg, cfg, &train_segs, &val_segs, shuffle_seed,
            )?,
        };
        trials.push(TrialOutcome {
            trial,
            model_seed,
            result,
            report,
        });
    }

    let kinds = cfg.targets.kinds();
    let columns = kinds
        .iter()
        .enumerate()
        .map(|(k, &kind)| {
            let per_trial: Vec<f64> = trials
                .iter()
                .map(|t| t.report.targets[k].ppmc_mean)
                .collect();
            let (mean, std) = mean_std(&per_trial);
            TrialColumn { kind, mean, std }
        })
        .collect();
    let per_trial_avg: Vec<f64> = trials.iter().map(|t| t.report.average()).collect();
    let (average_mean, average_std) = mean_std(&per_trial_avg);
    Ok(TrialReport {
        tag: cfg.targets.tag().to_string(),
        columns,
        average_mean,
        average_std,
        trials,
    })
}

fn column_header(kind: TraceKind) -> &'static str {
    match kind {
        TraceKind::Nasalance => "Nasalance",
        TraceKind::Voicing => "Voicing",
        TraceKind::Periodicity => "Perio.",
        TraceKind::Aperiodicity => "Aperio.",
        TraceKind::Pitch => "Pitch",
        _ => "",
    }
}

fn cell(mean: f64, std: f64) -> String {
    format!("{mean:.4}({std:.2})")
}

impl TrialReport {
    fn column_for(&self, kind: TraceKind) -> Option<&TrialColumn> {
        self.columns.iter().find(|c| c.kind == kind)
    }
}

/// Side-by-side summary of one or more trial reports, one row per
/// condition and one column per network target plus the average.
/// Targets a condition does not estimate render as "-".
pub fn results_table(reports: &[&TrialReport]) -> String {
    const WIDTH: usize = 14;
    let mut out = format!("{:<10}", "Model");
    for &kind in &TraceKind::TARGETS {
        let _ = write!(out, "{:>WIDTH$}", column_header(kind));
    }
    let _ = write!(out, "{:>WIDTH$}", "Average");
    out.push('\n');
    for report in reports {
        let _ = write!(out, "{:<10}", report.tag);
        for &kind in &TraceKind::TARGETS {
            let text = report
                .column_for(kind)
                .map_or_else(|| "-".to_string(), |c| cell(c.mean, c.std));
            let _ = write!(out, "{text:>WIDTH$}");
        }
        let _ = write!(out, "{:>WIDTH$}", cell(report.average_mean, report.average_std));
        out.push('\n');
    }
    out
}

/// CSV rendering of trial summaries: one row per condition and target.
pub fn results_csv(reports: &[&TrialReport]) -> String {
    let mut out = String::from("model,target,ppmc_mean,ppmc_std,n_trials\n");
    for report in reports {
        for c in &report.columns {
            let _ = writeln!(
                out,
                "{},{},{:.6},{:.6},{}",
                report.tag,
                c.kind.as_str(),
                c.mean,
                c.std,
                report.trials.len()
            );
        }
        let _ = writeln!(
            out,
            "{},average,{:.6},{:.6},{}",
            report.tag,
            report.average_mean,
            report.average_std,
            report.trials.len()
        );
    }
    out
}
