//! Drives the selnmt binary through full train/translate/evaluate/inspect
//! runs in temporary directories and checks files, stdout, and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_selnmt"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn write_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    let lines = [
        r#"{"doc_id":"d0","src":["a b c","b d a","c a"],"tgt":["b a","a d","a c"]}"#,
        r#"{"doc_id":"d1","src":["d d b","a c d"],"tgt":["b b","c a d"]}"#,
    ];
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    path
}

fn write_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("config.json");
    let base = r#""d_model": 16, "d_ffn": 32, "heads": 2, "n1": 1, "n2": 1,
        "decoder_layers": 1, "max_positions": 32, "dropout": 0.1,
        "steps": 6, "warmup": 2, "max_tokens": 64"#;
    fs::write(&path, format!("{{ {base}{extra} }}")).unwrap();
    path
}

fn train_into(dir: &Path, corpus: &Path, config: &Path, extra: &[&str]) -> Output {
    let out_dir = dir.to_str().unwrap();
    let mut args = vec![
        "train",
        "--corpus",
        corpus.to_str().unwrap(),
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir,
    ];
    args.extend_from_slice(extra);
    run(&args)
}

#[test]
fn pipeline_trains_translates_evaluates_and_inspects() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), "");
    let out_dir = tmp.path().join("run");

    let trained = train_into(&out_dir, &corpus, &config, &[]);
    assert_ok(&trained);
    let stdout = String::from_utf8(trained.stdout).unwrap();
    assert!(stdout.contains("config: {"), "{stdout}");
    assert!(out_dir.join("checkpoint-final.bin").exists());
    assert!(out_dir.join("vocab.txt").exists());
    let metrics = fs::read_to_string(out_dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 7, "header plus one line per step");

    let ckpt = out_dir.join("checkpoint-final.bin");
    let hyp_path = tmp.path().join("hyp.jsonl");
    let translated = run(&[
        "translate",
        "--corpus",
        corpus.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--out",
        hyp_path.to_str().unwrap(),
        "--beam",
        "2",
    ]);
    assert_ok(&translated);
    let hyp_text = fs::read_to_string(&hyp_path).unwrap();
    let lines: Vec<&str> = hyp_text.lines().collect();
    assert_eq!(lines.len(), 3, "header plus one record per document");
    let rec: serde_json::Value = serde_json::from_str(lines[1]).unwrap();
    assert_eq!(rec["doc_id"], "d0");
    assert_eq!(rec["hyp"].as_array().unwrap().len(), 3);

    let evaluated = run(&[
        "evaluate",
        "--hyp",
        hyp_path.to_str().unwrap(),
        "--ref",
        corpus.to_str().unwrap(),
    ]);
    assert_ok(&evaluated);
    let text = String::from_utf8(evaluated.stdout).unwrap();
    assert!(text.starts_with("BLEU = "), "{text}");

    let trace_path = tmp.path().join("trace.json");
    let inspected = run(&[
        "inspect",
        "--corpus",
        corpus.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--index",
        "1",
        "--out",
        trace_path.to_str().unwrap(),
    ]);
    assert_ok(&inspected);
    let trace: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&trace_path).unwrap()).unwrap();
    assert_eq!(trace["schema"], "selnmt/trace");
    assert_eq!(trace["doc_id"], "d0");
    assert_eq!(trace["index"], 1);
    assert_eq!(trace["layers"].as_array().unwrap().len(), 1);
}

#[test]
fn same_seed_reruns_reproduce_the_metrics_log_exactly() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), "");
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert_ok(&train_into(&a, &corpus, &config, &[]));
    assert_ok(&train_into(&b, &corpus, &config, &[]));
    let left = fs::read(a.join("metrics.jsonl")).unwrap();
    assert_eq!(left, fs::read(b.join("metrics.jsonl")).unwrap());
    assert!(!left.is_empty());
    // A different seed changes the numbers.
    let c = tmp.path().join("c");
    assert_ok(&train_into(&c, &corpus, &config, &["--seed", "7"]));
    assert_ne!(left, fs::read(c.join("metrics.jsonl")).unwrap());
}

#[test]
fn resuming_a_truncated_run_recreates_the_full_log() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), r#", "checkpoint_every": 3"#);
    let full = tmp.path().join("full");
    assert_ok(&train_into(&full, &corpus, &config, &[]));

    // Fake an interruption after step 3: keep the periodic checkpoint and
    // the log lines up to it, then resume.
    let cut = tmp.path().join("cut");
    fs::create_dir_all(&cut).unwrap();
    fs::copy(full.join("checkpoint-000003.bin"), cut.join("checkpoint-000003.bin")).unwrap();
    let metrics = fs::read_to_string(full.join("metrics.jsonl")).unwrap();
    let head: Vec<&str> = metrics.lines().take(4).collect();
    fs::write(cut.join("metrics.jsonl"), head.join("\n") + "\n").unwrap();

    let resumed = train_into(
        &cut,
        &corpus,
        &config,
        &["--resume", cut.join("checkpoint-000003.bin").to_str().unwrap()],
    );
    assert_ok(&resumed);
    assert_eq!(
        fs::read(cut.join("metrics.jsonl")).unwrap(),
        fs::read(full.join("metrics.jsonl")).unwrap()
    );
    assert_eq!(
        fs::read(cut.join("checkpoint-final.bin")).unwrap(),
        fs::read(full.join("checkpoint-final.bin")).unwrap()
    );
}

#[test]
fn usage_problems_exit_one() {
    let out = run(&["train", "--no-such-flag"]);
    assert_eq!(exit_code(&out), 1);

    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let bad_config = tmp.path().join("bad.json");
    fs::write(&bad_config, r#"{"d_modle": 16}"#).unwrap();
    let out = train_into(&tmp.path().join("x"), &corpus, &bad_config, &[]);
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("d_modle"));

    // Invalid hyper-parameters are a usage problem too.
    let invalid = tmp.path().join("invalid.json");
    fs::write(&invalid, r#"{"d_model": 16, "heads": 3}"#).unwrap();
    let out = train_into(&tmp.path().join("y"), &corpus, &invalid, &[]);
    assert_eq!(exit_code(&out), 1);
}

#[test]
fn data_problems_exit_two() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), "");

    let missing = tmp.path().join("nope.jsonl");
    let out = train_into(&tmp.path().join("x"), &missing, &config, &[]);
    assert_eq!(exit_code(&out), 2);

    let malformed = tmp.path().join("mal.jsonl");
    fs::write(&malformed, "{\"doc_id\":\"a\",\"src\":[\"x\"]}\n{broken\n").unwrap();
    let out = train_into(&tmp.path().join("y"), &malformed, &config, &[]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    // Training needs targets.
    let untargeted = tmp.path().join("untargeted.jsonl");
    fs::write(&untargeted, "{\"doc_id\":\"a\",\"src\":[\"x y\"]}\n").unwrap();
    let out = train_into(&tmp.path().join("z"), &untargeted, &config, &[]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("target"));

    // Hypothesis/reference count mismatch.
    let h = tmp.path().join("h.txt");
    let r = tmp.path().join("r.txt");
    fs::write(&h, "one\ntwo\n").unwrap();
    fs::write(&r, "one\n").unwrap();
    let out = run(&["evaluate", "--hyp", h.to_str().unwrap(), "--ref", r.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn evaluate_scores_identical_text_files_at_one_hundred() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("same.txt");
    fs::write(&path, "the cat sat on the mat\na longer second sentence here\n").unwrap();
    let out = run(&["evaluate", "--hyp", path.to_str().unwrap(), "--ref", path.to_str().unwrap()]);
    assert_ok(&out);
    assert_eq!(String::from_utf8(out.stdout).unwrap(), "BLEU = 100.00\n");
}

#[test]
fn inspect_index_out_of_range_exits_two() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), "");
    let out_dir = tmp.path().join("run");
    assert_ok(&train_into(&out_dir, &corpus, &config, &[]));
    let out = run(&[
        "inspect",
        "--corpus",
        corpus.to_str().unwrap(),
        "--checkpoint",
        out_dir.join("checkpoint-final.bin").to_str().unwrap(),
        "--index",
        "99",
        "--out",
        tmp.path().join("t.json").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("out of range"));
}

#[test]
fn translate_window_and_mode_overrides_are_accepted() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), r#", "mode": "bi", "alpha": 0.5"#);
    let out_dir = tmp.path().join("run");
    assert_ok(&train_into(&out_dir, &corpus, &config, &[]));
    let ckpt = out_dir.join("checkpoint-final.bin");

    for (name, extra) in [
        ("online", vec!["--window", "1,0"]),
        ("greedy", vec!["--beam", "1"]),
        ("bi", vec!["--mode", "bi"]),
    ] {
        let out_path = tmp.path().join(format!("{name}.jsonl"));
        let mut args = vec![
            "translate",
            "--corpus",
            corpus.to_str().unwrap(),
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--out",
            out_path.to_str().unwrap(),
        ];
        args.extend(extra);
        let out = run(&args);
        assert_ok(&out);
        assert_eq!(fs::read_to_string(out_path).unwrap().lines().count(), 3, "{name}");
    }
}

#[test]
fn mono_training_logs_no_bilingual_loss_and_bi_logs_both() {
    let tmp = TempDir::new().unwrap();
    let corpus = write_corpus(tmp.path());
    let config = write_config(tmp.path(), "");
    let mono_dir = tmp.path().join("mono");
    assert_ok(&train_into(&mono_dir, &corpus, &config, &["--mode", "mono"]));
    let line = fs::read_to_string(mono_dir.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    let step: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert!(step["loss_m"].is_f64());
    assert!(step["loss_b"].is_null());

    let bi_dir = tmp.path().join("bi");
    assert_ok(&train_into(&bi_dir, &corpus, &config, &["--mode", "bi"]));
    let line = fs::read_to_string(bi_dir.join("metrics.jsonl"))
        .unwrap()
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    let step: serde_json::Value = serde_json::from_str(&line).unwrap();
    assert!(step["loss_m"].is_f64());
    assert!(step["loss_b"].is_f64());
}
