//! `velotrace`: synthesize paired corpora, extract physiological
//! traces, train the acoustic-to-trace estimator, and analyze results.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration
//! error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use velotrace_core::dataset::{prepare_dataset, write_dataset_cache, PreparedDataset};
use velotrace_core::error::{Error, Result};
use velotrace_core::eval::{detect_landmarks, evaluate_model, landmarks_csv};
use velotrace_core::io::trace_csv::fmt_sig6;
use velotrace_core::io::{
    read_manifest, read_run_config, read_split, read_trace, read_wav, write_checkpoint,
    write_split, write_trace, RunConfig,
};
use velotrace_core::physio::{
    app_surrogate, compute_nasalance, compute_voicing, validate_against_hsv, Trace, TraceKind,
};
use velotrace_core::synth::{build_corpus, stale_corpus_files, MANIFEST_FILE};
use velotrace_core::tcn::{build_model, ModelConfig, Precision};
use velotrace_core::train::{
    history_csv, make_splits, results_csv, results_table, run_trials, CorpusManifest,
    SplitManifest, TargetSet, TrialReport,
};

#[derive(Parser)]
#[command(
    name = "velotrace",
    version,
    about = "Acoustic-to-nasality speech inversion toolkit"
)]
struct Cli {
    /// TOML run configuration; command flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the deterministic synthetic paired corpus.
    Synth(SynthArgs),
    /// Run one extraction pipeline over recordings and write a trace CSV.
    Extract(ExtractArgs),
    /// Corpus preprocessing.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Train speaker-independent estimators and report test agreement.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a held-out subset.
    Eval(EvalArgs),
    /// Correlate extracted nasalance with endoscopy brightness traces.
    ValidateHsn(ValidateArgs),
    /// Detect gesture landmarks in a trace CSV.
    Landmarks(LandmarksArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Number of synthetic speakers (at least 3).
    #[arg(long, default_value_t = 8)]
    speakers: usize,
    /// Utterances generated per speaker (at least 2).
    #[arg(long, default_value_t = 12)]
    utts_per_speaker: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output corpus directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Regenerate even when the directory already matches.
    #[arg(long)]
    force: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum ExtractKind {
    Nasalance,
    Voicing,
    App,
}

#[derive(Args)]
struct ExtractArgs {
    /// Which pipeline to run.
    #[arg(long, value_enum)]
    kind: ExtractKind,
    /// Oral microphone WAV (nasalance).
    #[arg(long, value_name = "WAV")]
    oral: Option<PathBuf>,
    /// Nasal microphone WAV (nasalance).
    #[arg(long, value_name = "WAV")]
    nasal: Option<PathBuf>,
    /// Electroglottograph WAV (voicing, app).
    #[arg(long, value_name = "WAV")]
    egg: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long, value_name = "CSV")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum DatasetCommand {
    /// Extract targets and spectrograms for a corpus and cache them.
    Build(DatasetBuildArgs),
}

#[derive(Args)]
struct DatasetBuildArgs {
    /// Corpus directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Cache output directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TargetsArg {
    /// Nasalance only (the SI-noSF condition).
    Nasalance,
    /// Nasalance plus source features (the SI-SF condition).
    All,
}

impl TargetsArg {
    fn target_set(self) -> TargetSet {
        match self {
            TargetsArg::Nasalance => TargetSet::NasalanceOnly,
            TargetsArg::All => TargetSet::WithSourceFeatures,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Corpus directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Output directory for splits, histories, checkpoints, reports.
    #[arg(long, value_name = "DIR")]
    work: PathBuf,
    /// Which targets the estimator learns.
    #[arg(long, value_enum)]
    targets: Option<TargetsArg>,
    /// Experiment seed (model initialization and shuffling).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of training repetitions.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Speakers assigned to training; the rest are held out.
    #[arg(long)]
    train_speakers: Option<usize>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Subset {
    Train,
    Val,
    Test,
}

#[derive(Args)]
struct EvalArgs {
    /// Corpus directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Trained model checkpoint.
    #[arg(long, value_name = "FILE")]
    checkpoint: PathBuf,
    /// Split manifest written by `train`.
    #[arg(long, value_name = "FILE")]
    split: PathBuf,
    /// Which split subset to evaluate.
    #[arg(long, value_enum, default_value_t = Subset::Test)]
    subset: Subset,
    /// Emit the report as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ValidateArgs {
    /// Corpus directory containing manifest.json.
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    /// Emit per-utterance correlations as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct LandmarksArgs {
    /// Input trace CSV.
    #[arg(long, value_name = "CSV")]
    trace: PathBuf,
    /// Output CSV; stdout when omitted.
    #[arg(long, value_name = "CSV")]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_usage() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => read_run_config(p),
        None => Ok(RunConfig::default()),
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Extract(args) => cmd_extract(args, &cfg),
        Command::Dataset(DatasetCommand::Build(args)) => cmd_dataset_build(args),
        Command::Train(args) => cmd_train(args, cfg),
        Command::Eval(args) => cmd_eval(args),
        Command::ValidateHsn(args) => cmd_validate_hsn(args, &cfg),
        Command::Landmarks(args) => cmd_landmarks(args),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let manifest_path = args.out.join(MANIFEST_FILE);
    if !args.force {
        if let Ok(existing) = read_manifest(&manifest_path) {
            let same_request = existing.seed == args.seed
                && existing.n_speakers == args.speakers
                && existing.utterances_per_speaker == args.utts_per_speaker;
            if same_request && stale_corpus_files(&args.out, &existing).is_empty() {
                println!(
                    "corpus up to date ({} utterances), skipping synthesis",
                    existing.utterances.len()
                );
                println!("{}", manifest_path.display());
                return Ok(());
            }
        }
    }
    let manifest = build_corpus(&args.out, args.speakers, args.utts_per_speaker, args.seed)?;
    println!(
        "synthesized {} utterances from {} speakers",
        manifest.utterances.len(),
        manifest.speakers.len()
    );
    println!("{}", manifest_path.display());
    Ok(())
}

fn require(path: Option<PathBuf>, flag: &str, kind: &str) -> Result<PathBuf> {
    path.ok_or_else(|| Error::Config(format!("--{flag} is required for --kind {kind}")))
}

fn cmd_extract(args: ExtractArgs, cfg: &RunConfig) -> Result<()> {
    match args.kind {
        ExtractKind::Nasalance => {
            let oral_path = require(args.oral, "oral", "nasalance")?;
            let nasal_path = require(args.nasal, "nasal", "nasalance")?;
            let oral = read_wav(&oral_path)?;
            let nasal = read_wav(&nasal_path)?;
            let (trace, diag) = compute_nasalance(&oral, &nasal, &cfg.nasalance)?;
            write_trace(&args.out, &trace)?;
            println!(
                "wrote {} ({} frames, {} guarded samples)",
                args.out.display(),
                trace.len(),
                diag.guarded_samples
            );
        }
        ExtractKind::Voicing => {
            let egg = read_wav(require(args.egg, "egg", "voicing")?)?;
            let (trace, diag) = compute_voicing(&egg, &cfg.nasalance)?;
            write_trace(&args.out, &trace)?;
            let note = if diag.degenerate_input {
                " (degenerate input, all unvoiced)"
            } else {
                ""
            };
            println!("wrote {} ({} frames){note}", args.out.display(), trace.len());
        }
        ExtractKind::App => {
            let egg = read_wav(require(args.egg, "egg", "app")?)?;
            let (periodicity, aperiodicity, pitch) =
                app_surrogate(&egg, cfg.nasalance.target_rate_hz)?;
            let csv = app_csv(&periodicity, &aperiodicity, &pitch);
            std::fs::write(&args.out, csv).map_err(|e| Error::io(&args.out, e))?;
            println!("wrote {} ({} frames)", args.out.display(), periodicity.len());
        }
    }
    Ok(())
}

/// Three aligned source-feature traces as one CSV.
fn app_csv(periodicity: &Trace, aperiodicity: &Trace, pitch: &Trace) -> String {
    let mut out = String::from("time_s,periodicity,aperiodicity,pitch\n");
    for i in 0..periodicity.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_sig6(periodicity.sample_time(i)),
            fmt_sig6(periodicity.values[i]),
            fmt_sig6(aperiodicity.values[i]),
            fmt_sig6(pitch.values[i]),
        );
    }
    out
}

fn load_corpus(corpus: &Path) -> Result<(CorpusManifest, PreparedDataset)> {
    let manifest = read_manifest(&corpus.join(MANIFEST_FILE))?;
    let dataset = prepare_dataset(corpus, &manifest)?;
    Ok((manifest, dataset))
}

fn cmd_dataset_build(args: DatasetBuildArgs) -> Result<()> {
    let (_, dataset) = load_corpus(&args.corpus)?;
    std::fs::create_dir_all(&args.out).map_err(|e| Error::io(&args.out, e))?;
    let n = write_dataset_cache(&args.out, &dataset)?;
    println!(
        "prepared {} utterances ({} segments), wrote {n} files to {}",
        dataset.utterances.len(),
        dataset.total_segments(),
        args.out.display()
    );
    Ok(())
}

/// Hold out roughly a quarter of the speakers, at least one.
fn default_train_speakers(n_speakers: usize) -> usize {
    ((n_speakers as f64 * 0.75).round() as usize).clamp(1, n_speakers.saturating_sub(1))
}

fn cmd_train(args: TrainArgs, mut cfg: RunConfig) -> Result<()> {
    if let Some(t) = args.targets {
        cfg.train.targets = t.target_set();
    }
    if let Some(seed) = args.seed {
        cfg.train.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.train.n_trials = trials;
    }
    if let Some(epochs) = args.max_epochs {
        cfg.train.max_epochs = epochs;
    }
    if let Some(batch) = args.batch_size {
        cfg.train.batch_size = batch;
    }
    cfg.validate()?;

    let (manifest, dataset) = load_corpus(&args.corpus)?;
    let n_train = args
        .train_speakers
        .unwrap_or_else(|| default_train_speakers(manifest.speakers.len()));
    let split = make_splits(&manifest, n_train, cfg.train.seed)?;
    std::fs::create_dir_all(&args.work).map_err(|e| Error::io(&args.work, e))?;
    write_split(&args.work.join("splits.json"), &split)?;

    let model_cfg = cfg.model_for_targets();
    let report = run_trials(&dataset, &split, &model_cfg, &cfg.train)?;

    let tag = cfg.train.targets.tag();
    for outcome in &report.trials {
        let stem = format!("{tag}_trial{}", outcome.trial);
        let history_path = args.work.join(format!("{stem}_history.csv"));
        std::fs::write(&history_path, history_csv(&outcome.result.history))
            .map_err(|e| Error::io(&history_path, e))?;
        let ckpt_cfg = ModelConfig {
            seed: outcome.model_seed,
            ..model_cfg.clone()
        };
        write_checkpoint(
            &args.work.join(format!("{stem}.ckpt")),
            &ckpt_cfg,
            &outcome.result.best_blobs,
        )?;
    }
    let table = results_table(&[&report]);
    let table_path = args.work.join(format!("{tag}_report.txt"));
    std::fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    let csv_path = args.work.join(format!("{tag}_report.csv"));
    std::fs::write(&csv_path, results_csv(&[&report])).map_err(|e| Error::io(&csv_path, e))?;

    print!("{table}");
    summarize_trials(&report);
    println!("artifacts in {}", args.work.display());
    Ok(())
}

fn summarize_trials(report: &TrialReport) {
    for outcome in &report.trials {
        println!(
            "trial {}: {} epochs, best epoch {} (val loss {:.6})",
            outcome.trial,
            outcome.result.history.len(),
            outcome.result.best_epoch,
            outcome.result.best_val_loss
        );
    }
}

fn subset_ids(split: &SplitManifest, subset: Subset) -> &[String] {
    match subset {
        Subset::Train => &split.train,
        Subset::Val => &split.val,
        Subset::Test => &split.test,
    }
}

fn tag_for_width(n_targets: usize) -> Result<(TargetSet, &'static str)> {
    for set in [TargetSet::NasalanceOnly, TargetSet::WithSourceFeatures] {
        if set.n_targets() == n_targets {
            return Ok((set, set.tag()));
        }
    }
    Err(Error::Config(format!(
        "checkpoint predicts {n_targets} targets, expected 1 or 5"
    )))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let (ckpt_cfg, blobs) = velotrace_core::io::read_checkpoint(&args.checkpoint)?;
    let (set, tag) = tag_for_width(ckpt_cfg.n_targets)?;
    let split = read_split(&args.split)?;
    let ids = subset_ids(&split, args.subset);
    let (_, dataset) = load_corpus(&args.corpus)?;

    let report = match ckpt_cfg.precision {
        Precision::F32 => {
            let mut model = build_model::<f32>(&ckpt_cfg)?;
            model
                .import_blobs(&blobs)
                .map_err(|e| Error::bad_file(&args.checkpoint, format!("blob mismatch: {e}")))?;
            evaluate_model(&model, &dataset, ids, set.kinds(), tag)?
        }
        Precision::F64 => {
            let mut model = build_model::<f64>(&ckpt_cfg)?;
            model
                .import_blobs(&blobs)
                .map_err(|e| Error::bad_file(&args.checkpoint, format!("blob mismatch: {e}")))?;
            evaluate_model(&model, &dataset, ids, set.kinds(), tag)?
        }
    };
    if args.json {
        println!("{}", to_json(&report)?);
    } else {
        print!("{}", report.table());
        println!("{} utterances evaluated", report.n_utterances);
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::Config(format!("serialize: {e}")))
}

fn cmd_validate_hsn(args: ValidateArgs, cfg: &RunConfig) -> Result<()> {
    let manifest = read_manifest(&args.corpus.join(MANIFEST_FILE))?;
    let mut rows = Vec::new();
    let mut skipped = 0usize;
    for utt in &manifest.utterances {
        let Some(hsv_path) = &utt.hsv_path else {
            continue;
        };
        let oral = read_wav(args.corpus.join(&utt.oral_path))?;
        let nasal = read_wav(args.corpus.join(&utt.nasal_path))?;
        let (nasalance, _) = compute_nasalance(&oral, &nasal, &cfg.nasalance)?;
        let hsv = read_trace(args.corpus.join(hsv_path), TraceKind::HsvIntensity)?;
        match validate_against_hsv(&nasalance, &hsv) {
            Ok(rep) => rows.push((utt.id.clone(), rep)),
            Err(Error::InsufficientOverlap { overlap_s, min_s }) => {
                skipped += 1;
                if !args.json {
                    println!(
                        "{}: skipped ({overlap_s:.2} s overlap, validation needs {min_s:.0} s)",
                        utt.id
                    );
                }
            }
            Err(e) => return Err(e),
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(
            "no utterances with validatable endoscopy traces in the manifest".into(),
        ));
    }
    let mean_r = rows.iter().map(|(_, rep)| rep.r).sum::<f64>() / rows.len() as f64;
    if args.json {
        let per: Vec<serde_json::Value> = rows
            .iter()
            .map(|(id, rep)| {
                serde_json::json!({
                    "id": id,
                    "r": rep.r,
                    "p_proxy": rep.p_proxy,
                    "n": rep.n,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "per_utterance": per,
            "mean_r": mean_r,
            "n_utterances": rows.len(),
            "n_skipped": skipped,
        });
        println!("{}", to_json(&doc)?);
    } else {
        for (id, rep) in &rows {
            println!("{id}: r = {:+.4} (n = {})", rep.r, rep.n);
        }
        let note = if skipped > 0 {
            format!(" ({skipped} skipped)")
        } else {
            String::new()
        };
        println!("mean r = {mean_r:+.4} over {} utterances{note}", rows.len());
    }
    Ok(())
}

fn cmd_landmarks(args: LandmarksArgs) -> Result<()> {
    let trace = read_trace(&args.trace, TraceKind::Nasalance)?;
    let gestures = detect_landmarks(&trace)?;
    let csv = landmarks_csv(&gestures);
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).map_err(|e| Error::io(path, e))?;
            println!("{} gestures -> {}", gestures.len(), path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}
