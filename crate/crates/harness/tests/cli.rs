use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use asyncrl::metrics::parse_metrics;

fn asyncrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asyncrl")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn small_train(dir: &Path) -> Output {
    asyncrl(&[
        "train",
        "--algo",
        "q1",
        "--env",
        "chain",
        "--total-frames",
        "3000",
        "--eval-interval",
        "1000",
        "--hidden",
        "--lr",
        "0.01",
        "--deterministic",
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn train_then_eval() {
    let dir = tempfile::tempdir().unwrap();
    let out = small_train(dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics = fs::read_to_string(dir.path().join("metrics.jsonl")).unwrap();
    let recs = parse_metrics(&metrics).unwrap();
    let frames: Vec<u64> = recs.iter().map(|r| r.global_frames).collect();
    assert_eq!(frames, [0, 1000, 2000, 3000]);
    assert!(dir.path().join("run.toml").exists());

    let ckpt = dir.path().join("final.ckpt");
    let cfg = dir.path().join("run.toml");
    let eval = asyncrl(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--checkpoint",
        ckpt.to_str().unwrap(),
    ]);
    assert_eq!(code(&eval), 0, "{}", String::from_utf8_lossy(&eval.stderr));
    let v: serde_json::Value = serde_json::from_slice(&eval.stdout).unwrap();
    assert_eq!(v["episodes"], 10);
    assert!(v["mean"].as_f64().unwrap().is_finite());
}

#[test]
fn config_errors_exit_with_two() {
    for args in [
        &["train", "--algo", "nope"][..],
        &["train", "--threads", "0"],
        &["train", "--algo", "a3c_continuous", "--env", "chain"],
        &["train", "--optimizer", "adam"],
        &["train", "--config", "/nonexistent/run.toml"],
        &["sweep", "--lr-low", "0.1", "--lr-high", "0.01"],
    ] {
        let out = asyncrl(args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    fs::write(&path, "algo = \"q1\"\nlearning_rate = 0.1\n").unwrap();
    let out = asyncrl(&["train", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    let out_dir = dir.path().join("run");
    fs::write(
        &path,
        format!(
            "total_frames = 500\neval_interval = 500\nout_dir = {:?}\n",
            out_dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = asyncrl(&[
        "train",
        "--config",
        path.to_str().unwrap(),
        "--total-frames",
        "99999",
        "--deterministic",
        "--hidden",
        "4",
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let recs = parse_metrics(&fs::read_to_string(out_dir.join("metrics.jsonl")).unwrap()).unwrap();
    assert_eq!(recs.last().unwrap().global_frames, 500);
}

#[test]
fn bad_checkpoints_exit_with_their_own_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&small_train(dir.path())), 0);
    let cfg = dir.path().join("run.toml");
    let good = fs::read(dir.path().join("final.ckpt")).unwrap();
    let eval = |bytes: &[u8], extra: &[&str]| {
        let p = dir.path().join("x.ckpt");
        fs::write(&p, bytes).unwrap();
        let mut args = vec![
            "eval",
            "--config",
            cfg.to_str().unwrap(),
            "--checkpoint",
            p.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        code(&asyncrl(&args))
    };
    assert_eq!(eval(&good, &[]), 0);
    let truncated = eval(&good[..good.len() - 1], &[]);
    let mut bad_magic = good.clone();
    bad_magic[1] = 0;
    let magic = eval(&bad_magic, &[]);
    // a config file wins over flags, so change the network through a second file
    let other = dir.path().join("other.toml");
    let text = fs::read_to_string(&cfg).unwrap().replace("hidden = []", "hidden = [3]");
    fs::write(&other, text).unwrap();
    let p = dir.path().join("y.ckpt");
    fs::write(&p, &good).unwrap();
    let hash = code(&asyncrl(&[
        "eval",
        "--config",
        other.to_str().unwrap(),
        "--checkpoint",
        p.to_str().unwrap(),
    ]));
    let codes = [truncated, magic, hash];
    assert!(codes.iter().all(|c| ![0, 2, 3].contains(c)), "{codes:?}");
    assert!(truncated != magic && magic != hash && hash != truncated, "{codes:?}");
}

#[test]
fn bench_needs_a_reference_score() {
    let out = asyncrl(&["bench-scaling"]);
    assert_ne!(code(&out), 0);
}
