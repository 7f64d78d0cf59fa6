//! Acceptance suite for the training harness: the gradient check, the
//! baseline ladder, the skip-pair graph, relaxed-inference comparison, and
//! checkpoint determinism. Each test prints one PASS line with its measured
//! numbers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nltop_cli::commands::{
    self, cmd_train, prepare_task, run_bench, run_gradcheck, train_staged_model,
};
use nltop_cli::config::{ModelSpecText, RunConfig};
use nltop_core::learn::InferenceMode;
use nltop_core::mapsolver::SpenConfig;
use nltop_core::saddle::SaddleConfig;
use nltop_core::tasks;

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn load_config(name: &str) -> RunConfig {
    RunConfig::load(&config_path(name)).expect("config loads")
}

#[test]
fn gradient_check_passes_for_every_word_model_block() {
    // Unary networks, the shared pair table, and the two-layer sigmoid
    // transformation with identity/ones initialization all match central
    // finite differences within 1e-4.
    let cfg = load_config("words-full.toml");
    let rows = run_gradcheck(&cfg, 0).expect("gradcheck runs");
    assert!(rows.len() >= 9, "expected all parameter blocks, got {}", rows.len());
    let mut worst: f64 = 0.0;
    for row in &rows {
        assert!(
            row.pass,
            "block {} failed: max relative error {:.3e}",
            row.block, row.max_rel_err
        );
        worst = worst.max(row.max_rel_err);
    }
    println!(
        "[PASS] gradient check: {} blocks within 1e-4 of finite differences (worst {:.2e})",
        rows.len(),
        worst
    );
}

#[test]
fn baseline_ladder_orders_and_structure_helps() {
    // Reduced word task, seeds {0, 1, 2}: mean test character accuracy must
    // satisfy Unary <= DeepStruct <= LinearTop <= NLTop, with the full gap
    // at least 0.05, inside 30 minutes.
    let started = Instant::now();
    let cfg = load_config("words-reduced.toml");
    let mut sums = [0.0f64; 4]; // unary, deepstruct, lineartop, nltop
    for seed in [0u64, 1, 2] {
        let report = run_bench(&cfg, seed).expect("bench runs");
        assert_eq!(report.rows.len(), 4);
        for (i, row) in report.rows.iter().enumerate() {
            sums[i] += row.test.char_accuracy;
        }
        println!(
            "  seed {seed}: unary {:.4}, deepstruct {:.4}, lineartop {:.4}, nltop {:.4}",
            report.rows[0].test.char_accuracy,
            report.rows[1].test.char_accuracy,
            report.rows[2].test.char_accuracy,
            report.rows[3].test.char_accuracy
        );
    }
    let means: Vec<f64> = sums.iter().map(|s| s / 3.0).collect();
    let elapsed = started.elapsed();
    assert!(
        means[0] <= means[1] && means[1] <= means[2] && means[2] <= means[3],
        "ladder out of order: {means:?}"
    );
    assert!(
        means[3] - means[0] >= 0.05,
        "structure gain {:.4} below 0.05",
        means[3] - means[0]
    );
    assert!(
        elapsed.as_secs_f64() < 1800.0,
        "ladder took {:.0}s, budget is 30 minutes",
        elapsed.as_secs_f64()
    );
    println!(
        "[PASS] baseline ladder: means unary {:.4} <= deepstruct {:.4} <= lineartop {:.4} \
         <= nltop {:.4}, gain {:.4} (threshold 0.05), {:.0}s",
        means[0],
        means[1],
        means[2],
        means[3],
        means[3] - means[0],
        elapsed.as_secs_f64()
    );
}

/// Train the full NLTop stack (unary -> pairwise -> top) for one config and
/// return test character accuracy under saddle inference.
fn train_nltop_test_accuracy(cfg: &RunConfig, seed: u64) -> f64 {
    let task = prepare_task(cfg, seed).expect("task generates");
    let graph = cfg
        .build_graph(task.train.num_vars, task.train.domain, Some(&task.train))
        .expect("graph builds");
    let spec = ModelSpecText::from_config(cfg, task.unary_input, graph.total_slots());
    let model = spec.build(graph).expect("model builds");
    let params0 = model.init_params(seed).expect("init");
    let eval_saddle = SaddleConfig { record_trace: false, ..cfg.train.saddle.to_config() };
    let spen = cfg.eval.spen_config(seed);
    let (params, _) = train_staged_model(
        &model,
        &params0,
        &task,
        cfg,
        &["unary", "pairwise", "top"],
        seed,
        &eval_saddle,
        &spen,
    )
    .expect("staged training runs");
    tasks::evaluate(&model, &params, &task.test, InferenceMode::Saddle, &eval_saddle, &spen)
        .expect("evaluation runs")
        .char_accuracy
}

#[test]
fn second_order_graph_trains_and_does_not_regress() {
    // The skip-pair graph must train end to end and match the chain within
    // 0.02 test character accuracy.
    let chain_cfg = load_config("words-reduced.toml");
    let second_cfg = load_config("words-second-order.toml");
    let chain_acc = train_nltop_test_accuracy(&chain_cfg, 0);
    let second_acc = train_nltop_test_accuracy(&second_cfg, 0);
    assert!(
        second_acc >= chain_acc - 0.02,
        "second-order {second_acc:.4} regressed below chain {chain_acc:.4} - 0.02"
    );
    println!(
        "[PASS] second-order graph: nltop test char accuracy {second_acc:.4} vs chain \
         {chain_acc:.4} (tolerance -0.02)"
    );
}

#[test]
fn relaxed_inference_is_not_better_than_saddle() {
    // On the trained multilabel model, rounding-based relaxed inference must
    // not beat the saddle procedure by more than 0.02 Hamming loss.
    let cfg = load_config("multilabel.toml");
    let report = run_bench(&cfg, 0).expect("bench runs");
    assert!(report.multilabel);
    let saddle = report
        .rows
        .iter()
        .find(|r| r.name == "NLTop")
        .expect("NLTop row")
        .test
        .hamming_loss;
    let spen = report
        .rows
        .iter()
        .find(|r| r.name == "SPENInf")
        .expect("SPENInf row")
        .test
        .hamming_loss;
    assert!(
        spen >= saddle - 0.02,
        "relaxed inference Hamming {spen:.4} beats saddle {saddle:.4} by more than 0.02"
    );
    println!(
        "[PASS] relaxed inference: Hamming {spen:.4} >= saddle {saddle:.4} - 0.02"
    );
}

const DETERMINISM_CONFIG: &str = r#"
[run]
seed = 7
out_dir = "unused"

[task]
kind = "words"

[task.words]
vocabulary = "reduced"
train = 40
val = 10
test = 10
bg_lo = 0.8
bg_hi = 1.0
compact_alphabet = true

[graph]
kind = "chain"

[model]
unary_hidden = 16
pair = "shared"
top = "mlp"
top_activation = "sigmoid"
top_init = "identity-ones"

[train]
learning_rate = 0.001
l2 = 1e-4
minibatch = 10
epochs = 2
stages = ["unary", "pairwise", "top"]

[train.stage_overrides.unary]
epochs = 3

[train.saddle]
iterations = 20
prox_max_iters = 10
prox_tol = 1e-5
record_trace = false
"#;

#[test]
fn identical_train_runs_produce_identical_checkpoints() {
    let base = std::env::temp_dir().join(format!("nltop-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&base).unwrap();
    let config_file = base.join("determinism.toml");
    std::fs::write(&config_file, DETERMINISM_CONFIG).unwrap();
    let out_a = base.join("run-a");
    let out_b = base.join("run-b");
    cmd_train(&config_file, Some(&out_a), None).expect("first run");
    cmd_train(&config_file, Some(&out_b), None).expect("second run");
    let mut compared = 0;
    for name in ["model.ckpt", "ckpt-unary.ckpt", "ckpt-pairwise.ckpt", "ckpt-top.ckpt"] {
        let a = std::fs::read(out_a.join(name)).expect("checkpoint exists");
        let b = std::fs::read(out_b.join(name)).expect("checkpoint exists");
        assert_eq!(a, b, "checkpoint {name} differs between identical runs");
        compared += 1;
    }
    // History and metric tables carry no timestamps and must match too.
    for name in ["history.tsv", "metrics.tsv", "data_hashes.tsv"] {
        let a = std::fs::read(out_a.join(name)).unwrap();
        let b = std::fs::read(out_b.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
    let _ = std::fs::remove_dir_all(&base);
    println!(
        "[PASS] determinism: {compared} checkpoints plus history/metrics byte-identical \
         across two full training runs"
    );
}

#[test]
fn natural_mode_matches_model_shape() {
    // Small consistency check for the bench plumbing: chain potential-only
    // models decode exactly, loopy ones via message passing, tops via the
    // saddle loop.
    let cfg = load_config("words-reduced.toml");
    let task = prepare_task(&cfg, 0).unwrap();
    let graph = cfg.build_graph(task.train.num_vars, task.train.domain, None).unwrap();
    let spec = ModelSpecText::from_config(&cfg, task.unary_input, graph.total_slots());
    let base = spec.with_top("none").build(graph.clone()).unwrap();
    assert_eq!(commands::natural_mode(&base), InferenceMode::ExactDp);
    let top_model = spec.build(graph).unwrap();
    assert_eq!(commands::natural_mode(&top_model), InferenceMode::Saddle);
    let _ = SpenConfig::default();
    println!("[PASS] inference mode selection matches model shape");
}
