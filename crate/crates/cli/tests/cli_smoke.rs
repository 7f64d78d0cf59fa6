//! End-to-end smoke tests of the binary: exit codes and file outputs.

use std::path::PathBuf;
use std::process::Command;

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nltop"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("nltop-smoke-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const TINY_CONFIG: &str = r#"
[run]
seed = 1
out_dir = "unused"

[task]
kind = "words"

[task.words]
vocabulary = ["close", "other"]
train = 6
val = 3
test = 3
compact_alphabet = true

[graph]
kind = "chain"

[model]
unary_hidden = 8
pair = "shared"
top = "none"

[train]
learning_rate = 0.001
l2 = 0.0
minibatch = 3
epochs = 1
stages = ["unary"]

[train.saddle]
iterations = 10
record_trace = false
"#;

#[test]
fn malformed_config_exits_with_code_two() {
    let dir = scratch("badconfig");
    let config = dir.join("bad.toml");
    std::fs::write(&config, "[run]\nseed = 0\nbogus_key = true\n").unwrap();
    let status = binary()
        .args(["train", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&status.stderr);
    assert!(stderr.contains("config error"), "stderr: {stderr}");
}

#[test]
fn missing_checkpoint_exits_with_code_four() {
    let dir = scratch("missing");
    let status = binary()
        .args([
            "eval",
            "--checkpoint",
            dir.join("nope.ckpt").to_str().unwrap(),
            "--dataset",
            dir.join("nope.nlsd").to_str().unwrap(),
            "--mode",
            "saddle",
        ])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(4));
}

#[test]
fn gen_train_eval_infer_pipeline_round_trips() {
    let dir = scratch("pipeline");
    let config = dir.join("tiny.toml");
    std::fs::write(&config, TINY_CONFIG).unwrap();

    let gen = binary()
        .args([
            "gen-data",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    assert!(dir.join("data/train.nlsd").exists());
    assert!(dir.join("data_hashes.tsv").exists());

    let train = binary()
        .args([
            "train",
            "--config",
            config.to_str().unwrap(),
            "--out",
            dir.join("run").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(train.status.code(), Some(0), "{}", String::from_utf8_lossy(&train.stderr));
    let ckpt = dir.join("run/model.ckpt");
    assert!(ckpt.exists());
    assert!(dir.join("run/history.tsv").exists());

    let eval = binary()
        .args([
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--dataset",
            dir.join("data/test.nlsd").to_str().unwrap(),
            "--mode",
            "exact-dp",
            "--out",
            dir.join("eval").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(eval.status.code(), Some(0), "{}", String::from_utf8_lossy(&eval.stderr));
    assert!(dir.join("eval/eval-exact-dp.tsv").exists());
    let stdout = String::from_utf8_lossy(&eval.stdout);
    assert!(stdout.contains("char_acc"), "stdout: {stdout}");

    // unknown inference mode is a config error
    let bad_mode = binary()
        .args([
            "eval",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--dataset",
            dir.join("data/test.nlsd").to_str().unwrap(),
            "--mode",
            "oracle",
        ])
        .output()
        .unwrap();
    assert_eq!(bad_mode.status.code(), Some(2));

    let infer = binary()
        .args([
            "infer",
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--dataset",
            dir.join("data/test.nlsd").to_str().unwrap(),
            "--out",
            dir.join("infer").to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(infer.status.code(), Some(0), "{}", String::from_utf8_lossy(&infer.stderr));
    let trace = std::fs::read_to_string(dir.join("infer/infer-trace.tsv")).unwrap();
    assert!(trace.starts_with("iteration\tobjective\tprox_residual\tlambda_step"));
    assert!(trace.lines().count() > 5);

    let _ = std::fs::remove_dir_all(&dir);
}
