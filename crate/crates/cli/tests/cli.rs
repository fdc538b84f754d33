//! End-to-end checks of the `velotrace` binary: command behavior,
//! output formats, idempotence, determinism, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use velotrace_core::io::write_wav;
use velotrace_core::signal::Signal;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_velotrace"))
}

fn run_ok(args: &[&str]) -> String {
    let out = bin().args(args).output().expect("spawn velotrace");
    assert!(
        out.status.success(),
        "velotrace {args:?} failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

fn run_expect(args: &[&str], code: i32) -> Output {
    let out = bin().args(args).output().expect("spawn velotrace");
    assert_eq!(
        out.status.code(),
        Some(code),
        "velotrace {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_corpus(dir: &Path) -> PathBuf {
    let corpus = dir.join("corpus");
    run_ok(&[
        "synth",
        "--speakers",
        "3",
        "--utts-per-speaker",
        "2",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ]);
    corpus
}

fn csv_values(text: &str, column: usize) -> Vec<f64> {
    text.lines()
        .skip(1)
        .map(|line| {
            line.split(',')
                .nth(column)
                .expect("column present")
                .parse()
                .expect("numeric cell")
        })
        .collect()
}

#[test]
fn synth_is_idempotent_and_force_rebuilds() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let manifest = corpus.join("manifest.json");
    assert!(manifest.exists());
    let before = std::fs::read(&manifest).unwrap();

    let args = [
        "synth",
        "--speakers",
        "3",
        "--utts-per-speaker",
        "2",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
    ];
    let rerun = run_ok(&args);
    assert!(rerun.contains("up to date"), "rerun should no-op: {rerun}");

    // A damaged file defeats the hash check and triggers regeneration.
    let victim = corpus.join("spk00_utt00_oral.wav");
    std::fs::write(&victim, b"garbage").unwrap();
    let repaired = run_ok(&args);
    assert!(
        repaired.contains("synthesized"),
        "hash mismatch should rebuild: {repaired}"
    );
    assert_eq!(std::fs::read(&manifest).unwrap(), before);

    let forced = run_ok(&[
        "synth",
        "--speakers",
        "3",
        "--utts-per-speaker",
        "2",
        "--seed",
        "5",
        "--out",
        corpus.to_str().unwrap(),
        "--force",
    ]);
    assert!(forced.contains("synthesized"));
    assert_eq!(std::fs::read(&manifest).unwrap(), before, "rebuild is deterministic");
}

#[test]
fn synth_requires_out_flag() {
    run_expect(&["synth", "--speakers", "3", "--utts-per-speaker", "2"], 2);
}

#[test]
fn extract_nasalance_finds_nasal_frames() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let out = dir.path().join("nasalance.csv");
    // spk00_utt00 carries the vowel-plus-nasal-coda script.
    run_ok(&[
        "extract",
        "--kind",
        "nasalance",
        "--oral",
        corpus.join("spk00_utt00_oral.wav").to_str().unwrap(),
        "--nasal",
        corpus.join("spk00_utt00_nasal.wav").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("time_s,value\n"));
    let values = csv_values(&text, 1);
    assert!(values.len() > 50);
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    assert!(max > 0.0, "nasal stretch should push normalized nasalance positive, max {max}");
    assert!(values.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn extract_voicing_of_silence_is_floor() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("silence.wav");
    write_wav(&wav, &Signal::new(vec![0.0; 102_400], 51_200.0)).unwrap();
    let out = dir.path().join("voicing.csv");
    run_ok(&[
        "extract",
        "--kind",
        "voicing",
        "--egg",
        wav.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    for v in csv_values(&text, 1) {
        assert_eq!(v, -1.0);
    }

    // A constant trace has no gestures.
    let landmarks = run_ok(&["landmarks", "--trace", out.to_str().unwrap()]);
    assert_eq!(landmarks, "gesture_index,kind,time_s\n");
}

#[test]
fn extract_app_recovers_tone_pitch() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("tone.wav");
    let rate = 51_200.0;
    let samples: Vec<f64> = (0..102_400)
        .map(|i| (2.0 * std::f64::consts::PI * 200.0 * i as f64 / rate).sin())
        .collect();
    write_wav(&wav, &Signal::new(samples, rate)).unwrap();
    let out = dir.path().join("app.csv");
    run_ok(&[
        "extract",
        "--kind",
        "app",
        "--egg",
        wav.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("time_s,periodicity,aperiodicity,pitch\n"));
    let pitch = csv_values(&text, 3);
    // 200 Hz on the [60, 400] -> [-1, 1] scale.
    let expect = 2.0 * (200.0 - 60.0) / (400.0 - 60.0) - 1.0;
    let n = pitch.len();
    for &v in &pitch[n / 4..3 * n / 4] {
        assert!((v - expect).abs() < 0.02, "pitch {v} vs {expect}");
    }
    let periodicity = csv_values(&text, 1);
    for &v in &periodicity[n / 4..3 * n / 4] {
        assert!(v > 0.6, "steady tone should be strongly periodic, got {v}");
    }
}

#[test]
fn extract_rejects_missing_channel_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_expect(
        &[
            "extract",
            "--kind",
            "nasalance",
            "--oral",
            "whatever.wav",
            "--out",
            dir.path().join("x.csv").to_str().unwrap(),
        ],
        2,
    );
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("--nasal"), "should name the missing flag: {stderr}");
}

#[test]
fn dataset_build_writes_cache() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let cache = dir.path().join("cache");
    let stdout = run_ok(&[
        "dataset",
        "build",
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        cache.to_str().unwrap(),
    ]);
    assert!(stdout.contains("6 utterances"));
    let entries: Vec<String> = std::fs::read_dir(&cache)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(entries.iter().any(|n| n.ends_with("_nasalance.csv")));
    assert!(entries.iter().any(|n| n.ends_with(".adsp")));
}

fn train_args<'a>(corpus: &'a str, work: &'a str) -> Vec<&'a str> {
    vec![
        "train",
        "--corpus",
        corpus,
        "--work",
        work,
        "--targets",
        "all",
        "--trials",
        "1",
        "--max-epochs",
        "2",
        "--batch-size",
        "4",
        "--seed",
        "11",
    ]
}

#[test]
fn train_twice_writes_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let corpus = corpus.to_str().unwrap();
    let work_a = dir.path().join("work_a");
    let work_b = dir.path().join("work_b");

    let stdout = run_ok(&train_args(corpus, work_a.to_str().unwrap()));
    assert!(stdout.contains("SI-SF"), "table row present: {stdout}");
    run_ok(&train_args(corpus, work_b.to_str().unwrap()));

    for name in [
        "splits.json",
        "SI-SF_trial0_history.csv",
        "SI-SF_trial0.ckpt",
        "SI-SF_report.csv",
    ] {
        let a = std::fs::read(work_a.join(name)).unwrap();
        let b = std::fs::read(work_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }

    let history = std::fs::read_to_string(work_a.join("SI-SF_trial0_history.csv")).unwrap();
    let mut lines = history.lines();
    assert_eq!(lines.next(), Some("epoch,train_loss,val_loss,lr"));
    assert_eq!(lines.count(), 2);
}

#[test]
fn eval_reports_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let corpus = corpus.to_str().unwrap();
    let work = dir.path().join("work");
    let work_str = work.to_str().unwrap().to_string();
    let mut args = train_args(corpus, &work_str);
    args[6] = "nasalance";
    run_ok(&args);

    let ckpt = work.join("SI-noSF_trial0.ckpt");
    let split = work.join("splits.json");
    let table = run_ok(&[
        "eval",
        "--corpus",
        corpus,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--split",
        split.to_str().unwrap(),
    ]);
    assert!(table.contains("SI-noSF"));
    assert!(table.contains("nasalance"));

    let json = run_ok(&[
        "eval",
        "--corpus",
        corpus,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--split",
        split.to_str().unwrap(),
        "--json",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&json).expect("valid json");
    assert_eq!(doc["tag"], "SI-noSF");
    assert_eq!(doc["targets"].as_array().unwrap().len(), 1);
    let r = doc["targets"][0]["ppmc_mean"].as_f64().unwrap();
    assert!((-1.0..=1.0).contains(&r));

    run_expect(
        &[
            "eval",
            "--corpus",
            corpus,
            "--checkpoint",
            dir.path().join("missing.ckpt").to_str().unwrap(),
            "--split",
            split.to_str().unwrap(),
        ],
        1,
    );
}

#[test]
fn validate_hsn_reports_negative_mean() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let stdout = run_ok(&["validate-hsn", "--corpus", corpus.to_str().unwrap()]);
    assert!(stdout.contains("mean r = -"), "mean should be negative: {stdout}");
    assert_eq!(stdout.lines().count(), 7, "six utterances plus the mean line");

    let json = run_ok(&["validate-hsn", "--corpus", corpus.to_str().unwrap(), "--json"]);
    let doc: serde_json::Value = serde_json::from_str(&json).expect("valid json");
    assert_eq!(doc["n_utterances"], 6);
    assert!(doc["mean_r"].as_f64().unwrap() < 0.0);
    assert_eq!(doc["per_utterance"].as_array().unwrap().len(), 6);
}

#[test]
fn landmarks_extracts_gesture_rows() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let nas = dir.path().join("nasalance.csv");
    run_ok(&[
        "extract",
        "--kind",
        "nasalance",
        "--oral",
        corpus.join("spk00_utt00_oral.wav").to_str().unwrap(),
        "--nasal",
        corpus.join("spk00_utt00_nasal.wav").to_str().unwrap(),
        "--out",
        nas.to_str().unwrap(),
    ]);
    let out = dir.path().join("landmarks.csv");
    let stdout = run_ok(&[
        "landmarks",
        "--trace",
        nas.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(stdout.contains("gestures"));
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("gesture_index,kind,time_s"));
    let rows = lines.count();
    assert!(rows >= 3 && rows.is_multiple_of(3), "whole gestures only, got {rows} rows");
}

#[test]
fn config_file_overrides_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(dir.path());
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "[nasalance]\nsmooth_window_samples = 25\n").unwrap();
    let out = dir.path().join("nasalance.csv");
    run_ok(&[
        "extract",
        "--config",
        config.to_str().unwrap(),
        "--kind",
        "nasalance",
        "--oral",
        corpus.join("spk00_utt00_oral.wav").to_str().unwrap(),
        "--nasal",
        corpus.join("spk00_utt00_nasal.wav").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(out.exists());

    std::fs::write(&config, "[nasalance]\nsurprise = 1\n").unwrap();
    run_expect(
        &[
            "extract",
            "--config",
            config.to_str().unwrap(),
            "--kind",
            "nasalance",
            "--oral",
            corpus.join("spk00_utt00_oral.wav").to_str().unwrap(),
            "--nasal",
            corpus.join("spk00_utt00_nasal.wav").to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ],
        2,
    );
}
