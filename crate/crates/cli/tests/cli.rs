use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use flukefinder::corpus::{Interval, Label, LocalId, Manifest};
use flukefinder::seqclassifier::{checkpoint, Architecture, NetworkParams, TrainConfig};
use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_flukefinder"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/youtube/two_items")
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

fn list_files(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    if let Ok(rd) = fs::read_dir(dir) {
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                out.extend(list_files(&p));
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let o = run(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
}

#[test]
fn help_exits_zero() {
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    for sub in ["search", "prepare-frames", "extract-features", "crossval", "predict", "report", "annotate"] {
        assert!(stdout(&o).contains(sub), "{sub} missing from help");
    }
}

#[test]
fn missing_key_is_named() {
    let dir = TempDir::new().unwrap();
    let o = run(&["search", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`query`"), "{}", stderr(&o));

    let o = run(&["prepare-frames", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("decoder_command"));
}

#[test]
fn bad_config_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"folds": {"k": 1}}"#);
    let o = run(&["crossval", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("folds.k"));

    let cfg = write_config(dir.path(), r#"{"train": {"epochs": "many"}}"#);
    let o = run(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("train.epochs"), "{}", stderr(&o));

    let o = run(&["train", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn domain_error_exits_one() {
    let dir = TempDir::new().unwrap();
    let o = run(&["train", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn dry_run_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"query": "humpback whale", "fetch_command": "true", "decoder_command": "true"}"#,
    );
    let out = dir.path().join("run");
    let base = ["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--dry-run"];
    let fx = fixtures();
    let subcommands: Vec<Vec<&str>> = vec![
        vec!["search", "--fixtures", fx.to_str().unwrap()],
        vec!["fetch"],
        vec!["prepare-frames", "--strips"],
        vec!["extract-features"],
        vec!["train"],
        vec!["crossval"],
        vec!["predict", "vid_0001"],
        vec!["report"],
        vec!["annotate"],
        vec!["synth"],
    ];
    for sub in subcommands {
        let mut args = sub.clone();
        args.extend(base);
        let o = run(&args);
        assert_eq!(o.status.code(), Some(0), "{sub:?}: {}", stderr(&o));
        assert!(stdout(&o).contains("plan:"), "{sub:?}");
        assert!(stdout(&o).contains("dry run"), "{sub:?}");
    }
    assert!(!out.exists());
}

#[test]
fn predict_zero_checkpoint_ties_to_relevant() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["synth", "--count", "4", "--steps", "5", "--dim", "3", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));

    let arch = Architecture::default();
    let zeros = NetworkParams::zeros(3, &arch);
    let ckpt = dir.path().join("zero.ckpt");
    checkpoint::save(&ckpt, &zeros, &TrainConfig::default()).unwrap();

    let stem = dir.path().join("features/builtin/vid_0002");
    let o = run(&[
        "predict",
        "--out",
        out,
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "vid_0001",
        stem.to_str().unwrap(),
        "vid_0004",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 3);
    for (line, id) in lines.iter().zip(["vid_0001", "vid_0002", "vid_0004"]) {
        assert_eq!(line["local_id"], id);
        assert_eq!(line["label"], "relevant");
        assert_eq!(line["confidence"], 0.5);
    }
}

#[test]
fn predict_without_inputs_is_usage_error() {
    let o = run(&["predict"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synth_manifest_is_valid_and_rerun_identical() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let args = ["synth", "--count", "10", "--steps", "4", "--dim", "2", "--seed", "5", "--out", out];
    assert!(run(&args).status.success());
    let manifest_path = dir.path().join("corpus/manifest.ndjson");
    let first = fs::read(&manifest_path).unwrap();
    assert!(run(&args).status.success());
    assert_eq!(fs::read(&manifest_path).unwrap(), first);

    let m = Manifest::load(&manifest_path).unwrap();
    assert_eq!(m.len(), 10);
    for v in m.videos() {
        let iv = v.interval.expect("every synthetic video has an interval");
        match v.label.unwrap() {
            Label::Relevant => assert_eq!(iv, Interval::new(10.0, 22.0).unwrap()),
            Label::Irrelevant => assert!((iv.length() - 15.0).abs() < 1e-9),
        }
    }
}

#[test]
fn crossval_rerun_is_byte_identical_and_report_renders() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"train": {"epochs": 3, "arch": {"hidden1": 4, "hidden2": 3, "hidden3": 3}}}"#,
    );
    let c = cfg.to_str().unwrap();
    assert!(run(&["synth", "--count", "30", "--steps", "6", "--dim", "4", "--out", out]).status.success());
    let o = run(&["crossval", "--config", c, "--out", out, "--folds", "3"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("Average"));

    let reports = dir.path().join("reports");
    let snapshot: Vec<(PathBuf, Vec<u8>)> = list_files(&reports)
        .into_iter()
        .map(|p| (p.clone(), fs::read(&p).unwrap()))
        .collect();
    assert_eq!(snapshot.len(), 4);
    let o = run(&["crossval", "--config", c, "--out", out, "--folds", "3"]);
    assert!(o.status.success());
    for (p, bytes) in &snapshot {
        assert_eq!(&fs::read(p).unwrap(), bytes, "{} changed", p.display());
    }

    let predictions = fs::read_to_string(reports.join("predictions.ndjson")).unwrap();
    assert_eq!(predictions.lines().count(), 30);

    let o = run(&["report", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o), fs::read_to_string(reports.join("crossval.txt")).unwrap());
    let o = run(&["report", "--out", out, "--format", "csv"]);
    assert_eq!(stdout(&o), fs::read_to_string(reports.join("crossval.csv")).unwrap());
    let o = run(&["report", "--out", out, "--format", "xml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn search_twice_adds_nothing_new() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), r#"{"query": "humpback whale"}"#);
    let fx = fixtures();
    let args = [
        "search",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--fixtures",
        fx.to_str().unwrap(),
    ];
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest = dir.path().join("corpus/manifest.ndjson");
    let private = dir.path().join("corpus/private_map.tsv");
    let (m1, p1) = (fs::read(&manifest).unwrap(), fs::read(&private).unwrap());
    assert_eq!(Manifest::load(&manifest).unwrap().len(), 2);

    let o = run(&args);
    assert!(o.status.success());
    assert!(stdout(&o).contains("added 0"));
    assert_eq!(fs::read(&manifest).unwrap(), m1);
    assert_eq!(fs::read(&private).unwrap(), p1);
}

/// Writes an executable shell script and returns a command template for it.
fn script(dir: &Path, name: &str, body: &str, args: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\nset -e\n{body}\n")).unwrap();
    format!("sh {} {args}", path.display())
}

/// Search, fetch, label, decode, embed, train and predict, with shell
/// scripts standing in for the downloader and a 2 fps decoder.
#[test]
fn full_pipeline_with_fake_tools() {
    let dir = TempDir::new().unwrap();
    let root = dir.path();
    let png = root.join("frame.png");
    image::RgbImage::from_fn(20, 12, |x, y| image::Rgb([(x * 12) as u8, (y * 20) as u8, 90]))
        .save(&png)
        .unwrap();

    let fetch = script(root, "fetch.sh", r#"printf 'video %s' "$1" > "$2""#, "{platform_id} {output}");
    // one frame every 0.5 s from start to end inclusive
    let decode = script(
        root,
        "decode.sh",
        &format!(
            r#"n=$(awk -v s="$1" -v e="$2" 'BEGIN {{ print int((e - s) * 2 + 1e-9) + 1 }}')
i=0
: > "$3/timestamps.txt"
while [ $i -lt $n ]; do
  cp {png} "$3/$(printf %05d $i).png"
  awk -v s="$1" -v i=$i 'BEGIN {{ print s + i / 2 }}' >> "$3/timestamps.txt"
  i=$((i + 1))
done"#,
            png = png.display()
        ),
        "{start} {end} {out_dir}",
    );
    let cfg = write_config(
        root,
        &serde_json::json!({
            "query": "humpback whale",
            "fetch_command": fetch,
            "decoder_command": decode,
            "preprocess": {"side_px": 16},
            "train": {"epochs": 2, "batch_size": 2},
            "strip_frames": 8,
        })
        .to_string(),
    );
    let c = cfg.to_str().unwrap();
    let out = root.to_str().unwrap();
    let fx = fixtures();
    let step = |args: &[&str]| {
        let mut all = args.to_vec();
        all.extend(["--config", c, "--out", out]);
        let o = run(&all);
        assert!(o.status.success(), "{args:?}: {}", stderr(&o));
        o
    };

    step(&["search", "--fixtures", fx.to_str().unwrap()]);
    step(&["fetch"]);
    assert_eq!(list_files(&root.join("videos")).len(), 2);

    // annotation strips for the still-unlabeled videos
    step(&["prepare-frames", "--strips"]);
    let strip = root.join("corpus/frames/vid_0001/index.json");
    let index: Value = serde_json::from_slice(&fs::read(&strip).unwrap()).unwrap();
    assert_eq!(index["timestamps"].as_array().unwrap().len(), 8);

    let manifest_path = root.join("corpus/manifest.ndjson");
    let mut m = Manifest::load(&manifest_path).unwrap();
    let (a, b) = (LocalId::new("vid_0001"), LocalId::new("vid_0002"));
    m.upsert_label(&a, Label::Relevant).unwrap();
    m.set_interval(&a, Interval::new(10.0, 25.0).unwrap()).unwrap();
    m.upsert_label(&b, Label::Irrelevant).unwrap();
    m.save(&manifest_path).unwrap();

    step(&["prepare-frames"]);
    let m = Manifest::load(&manifest_path).unwrap();
    let frames = m.get(&a).unwrap().frame_count.unwrap();
    assert!(frames == 30 || frames == 31, "{frames}");
    let irr = m.get(&b).unwrap();
    assert!((irr.interval.unwrap().length() - 15.0).abs() < 1e-9 || irr.short_interval);
    let tensor: Value = serde_json::from_slice(&fs::read(root.join("tensors/vid_0001.json")).unwrap()).unwrap();
    assert_eq!(tensor["shape"], serde_json::json!([31, 16, 16, 3]));

    let manifest_before = fs::read(&manifest_path).unwrap();
    step(&["prepare-frames"]);
    assert_eq!(fs::read(&manifest_path).unwrap(), manifest_before);

    step(&["extract-features"]);
    let feats: Value = serde_json::from_slice(&fs::read(root.join("features/builtin/vid_0001.json")).unwrap()).unwrap();
    assert_eq!(feats["shape"], serde_json::json!([31, 8]));

    step(&["train"]);
    let o = step(&["predict", "vid_0001", "vid_0002"]);
    let lines: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    for l in &lines {
        let p = l["probs"].as_array().unwrap();
        let sum: f64 = p.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }
}

#[test]
fn corpus_lock_blocks_second_writer() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("corpus");
    let _held = flukefinder::corpus::CorpusLock::acquire(&corpus).unwrap();
    let o = run(&["synth", "--count", "4", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
