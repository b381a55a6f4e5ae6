use std::path::Path;
use std::process::{Command, Output};

use gazestudio::checkpoint::{parse_history, Checkpoint};
use gazestudio::dataset::{write_corpus, MANIFEST_FILE};
use gazestudio::gamap::{read_gamap, write_image};
use gazestudio::manifest::{save_manifest, Manifest, ManifestEntry};
use gazestudio::track::load_track_stem;
use gazestudio_core::net::{ClassifierParams, DEFAULT_CHANNELS};
use gazestudio_core::pipeline::track_map;
use gazestudio_core::synth::{generate, SplitName, SynthConfig};
use gazestudio_core::{KernelConfig, KlGrade};

fn studio(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaze-studio")).args(args).output().unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, seed: &str) {
    ok(&studio(&["generate", "--out", p(dir), "--seed", seed, "--n-train", "10", "--n-val", "0", "--n-test", "0", "--healthy", "2"]));
}

#[test]
fn generate_is_deterministic_per_seed() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "3");
    gen(b.path(), "3");
    gen(c.path(), "4");
    let read = |d: &Path, f: &str| std::fs::read(d.join(f)).unwrap();
    for f in [MANIFEST_FILE, "images/train-0004.png", "tracks/train-0004.gaze.jsonl", "tracks/train-0004.labels.jsonl", "healthy/train-0005.meta.json"] {
        assert_eq!(read(a.path(), f), read(b.path(), f), "{f}");
    }
    assert_ne!(read(a.path(), "images/train-0004.png"), read(c.path(), "images/train-0004.png"));
}

#[test]
fn render_writes_gamap() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "1");
    let stem = dir.path().join("tracks/train-0002");
    let out = dir.path().join("g.gamap");
    let png = dir.path().join("g.png");
    ok(&studio(&[
        "render",
        "--track",
        p(&stem.with_extension("gaze.jsonl")),
        "--meta",
        p(&stem.with_extension("meta.json")),
        "--out",
        p(&out),
        "--png",
        p(&png),
    ]));
    let map = read_gamap(&out).unwrap();
    let track = load_track_stem(&stem).unwrap();
    let expected = track_map(&track, &KernelConfig::default().scaled(128.0 / 800.0));
    assert_eq!((map.width(), map.height()), (128, 128));
    for (a, b) in map.values().iter().zip(expected.values()) {
        assert_eq!(*a, *b as f32 as f64);
    }
    assert!(png.is_file());

    let grid = dir.path().join("grid.gamap");
    let healthy = dir.path().join("healthy");
    ok(&studio(&["render", "--track", p(&stem.with_extension("gaze.jsonl")), "--out", p(&grid), "--processed", "--healthy-dir", p(&healthy), "--grid"]));
    assert_eq!(read_gamap(&grid).unwrap().width(), 16);
}

#[test]
fn segment_writes_filtered_track_and_report() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path(), "2");
    let track = dir.path().join("tracks/train-0003.gaze.jsonl");
    let report = dir.path().join("report.json");
    let out = dir.path().join("filtered/t3");
    ok(&studio(&[
        "segment",
        "--track",
        p(&track),
        "--healthy-dir",
        p(&dir.path().join("healthy")),
        "--out",
        p(&out),
        "--report",
        p(&report),
    ]));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let original = load_track_stem(&dir.path().join("tracks/train-0003")).unwrap();
    assert_eq!(r["gamma_series"].as_array().unwrap().len(), original.len() - 60 + 1);
    assert!(r["gamma_th"].as_f64().unwrap() > 0.0);
    let kept = r["kept_fraction"].as_f64().unwrap();
    let filtered = load_track_stem(&out).unwrap();
    assert_eq!(filtered.len(), (kept * original.len() as f64).round() as usize);

    let stdout = ok(&studio(&["segment", "--track", p(&track), "--healthy-dir", p(&dir.path().join("healthy")), "--out", p(&out)]));
    assert!(serde_json::from_str::<serde_json::Value>(&stdout).unwrap()["kept_fraction"].is_number());
}

#[test]
fn train_writes_checkpoint_and_history() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    let job = serde_json::json!({
        "synth": {"n_train": 20, "n_val": 10, "n_test": 10, "samples_per_track": 300},
        "benchmark": {"calibration_tracks": 5, "gaze_images": 10, "channels": 8},
        "train": {"epochs": 3, "batch_size": 8},
        "checkpoint": "out/ck.json",
        "history": "out/history.csv"
    });
    std::fs::write(&cfg, job.to_string()).unwrap();
    let stdout = ok(&studio(&["train", "--config", p(&cfg), "--seed", "6"]));
    assert!(stdout.contains("test: ACC="), "{stdout}");
    let ck = Checkpoint::load(&dir.path().join("out/ck.json")).unwrap();
    assert_eq!((ck.params.classes(), ck.params.channels(), ck.filter_seed), (5, 8, 6));
    assert_eq!(ck.config["train"]["seed"], 6);
    let csv = std::fs::read(dir.path().join("out/history.csv")).unwrap();
    assert!(csv.starts_with(b"epoch,split,acc,mae,ce,ac\n"));
    let h = parse_history(&csv).unwrap();
    assert_eq!(h.records.len(), 2 * 4);

    // Same seed, same checkpoint bytes.
    let first = std::fs::read(dir.path().join("out/ck.json")).unwrap();
    ok(&studio(&["train", "--config", p(&cfg), "--seed", "6"]));
    assert_eq!(std::fs::read(dir.path().join("out/ck.json")).unwrap(), first);
}

/// Grade-0 test images and an all-zero classifier: every score ties, ties go
/// to class 0, so every prediction is right.
fn all_correct_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let mut manifest = Manifest::default();
    let corpus = generate(&SynthConfig { n_train: 0, n_val: 0, n_test: 10, seed: 2, ..Default::default() });
    for item in corpus.items.iter().filter(|i| i.grade.value() == 0) {
        let rel = format!("images/{}.png", item.id);
        write_image(&dir.join(&rel), &item.image).unwrap();
        manifest.entries.push(ManifestEntry {
            image_id: item.id.clone(),
            image_path: rel.into(),
            grade: KlGrade::new(0).unwrap(),
            boxes: vec![],
            gaze_track_paths: vec![],
            split: Some(SplitName::Test),
        });
    }
    let m = dir.join("manifest.json");
    save_manifest(&manifest, &m).unwrap();
    let ck = Checkpoint { params: ClassifierParams::zeros(5, DEFAULT_CHANNELS), filter_seed: 0, config: serde_json::Value::Null };
    let c = dir.join("ck.json");
    ck.save(&c).unwrap();
    (m, c)
}

#[test]
fn evaluate_all_correct_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (m, c) = all_correct_fixture(dir.path());
    let stdout = ok(&studio(&["evaluate", "--checkpoint", p(&c), "--data", p(&m)]));
    assert!(stdout.contains("ACC=1.000"), "{stdout}");
    assert!(stdout.contains("MAE=0.000"), "{stdout}");

    let stdout = ok(&studio(&["evaluate", "--checkpoint", p(&c), "--data", p(&m), "--against", p(&c)]));
    assert!(stdout.contains("welch: t=0.0000"), "{stdout}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // Usage error.
    assert_eq!(studio(&["render", "--out", "x"]).status.code(), Some(2));
    assert_eq!(studio(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(studio(&["--help"]).status.code(), Some(0));
    // Bad input: grade 7 in the manifest.
    let m = dir.path().join("bad.json");
    std::fs::write(&m, br#"{"entries":[{"image_id":"x","image_path":"x.png","grade":7}]}"#).unwrap();
    let (_, c) = all_correct_fixture(dir.path());
    let out = studio(&["evaluate", "--checkpoint", p(&c), "--data", p(&m)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("grade 7"));
    // Bad input: malformed gaze line.
    let t = dir.path().join("t.gaze.jsonl");
    std::fs::write(&t, b"{\"t_ms\": \"abc\", \"x\": 1, \"y\": 1}\n").unwrap();
    std::fs::write(dir.path().join("t.meta.json"), br#"{"image_id":"a","reader_id":"b","decision":0,"image_width":8,"image_height":8}"#).unwrap();
    let out = studio(&["render", "--track", p(&t), "--out", p(&dir.path().join("o.gamap"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 1"));
    // Internal: output path under a regular file.
    std::fs::write(&t, b"{\"t_ms\": 0, \"x\": 1, \"y\": 1}\n").unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, b"").unwrap();
    let out = studio(&["render", "--track", p(&t), "--out", p(&blocker.join("o.gamap"))]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn written_corpus_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(&generate(&SynthConfig { n_train: 0, n_val: 0, n_test: 5, seed: 8, ..Default::default() }), dir.path()).unwrap();
    let ck = Checkpoint { params: ClassifierParams::zeros(5, DEFAULT_CHANNELS), filter_seed: 0, config: serde_json::Value::Null };
    let c = dir.path().join("ck.json");
    ck.save(&c).unwrap();
    let stdout = ok(&studio(&["evaluate", "--checkpoint", p(&c), "--data", p(&dir.path().join(MANIFEST_FILE)), "--split", "all"]));
    // Grades 0..4 once each; constant class 0 gets one right, MAE = (0+1+2+3+4)/5.
    assert!(stdout.contains("N=5 ACC=0.200 MAE=2.000"), "{stdout}");
}
