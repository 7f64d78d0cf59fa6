//! Command implementations: data generation, training, evaluation, single
//! example inference, gradient checking, and the baseline benchmark.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;

use nltop_core::learn::{
    self, example_gradient, loss_vector, InferenceMode, MetricFn, ModelParams, Stage,
    StageKind, StructuredModel, TrainConfig, TrainOutput,
};
use nltop_core::mapsolver::SpenConfig;
use nltop_core::saddle::SaddleConfig;
use nltop_core::tasks::{self, Dataset, MetricReport};
use nltop_core::{rng, PotentialVector};

use crate::checkpoint::{fnv1a, Checkpoint};
use crate::config::{ModelSpecText, RunConfig};
use crate::error::{CliError, CliResult};

/// Generated splits plus the feature geometry the model needs.
pub struct PreparedTask {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub unary_input: usize,
}

pub fn prepare_task(cfg: &RunConfig, seed: u64) -> CliResult<PreparedTask> {
    match cfg.task.kind.as_str() {
        "words" => {
            let spec = cfg.word_spec(seed)?;
            let data = tasks::gen_words(&spec)?;
            let unary_input = data.train.feature_dim;
            Ok(PreparedTask { train: data.train, val: data.val, test: data.test, unary_input })
        }
        "multilabel" => {
            let spec = cfg.multilabel_spec(seed)?;
            let data = tasks::gen_multilabel(&spec)?;
            let unary_input = data.train.feature_dim;
            Ok(PreparedTask { train: data.train, val: data.val, test: data.test, unary_input })
        }
        other => Err(CliError::config(format!("unknown task kind {other:?}"))),
    }
}

fn stage_kind(name: &str) -> StageKind {
    match name {
        "unary" => StageKind::UnaryOnly,
        "pairwise" => StageKind::PairwiseGivenUnary,
        "top" => StageKind::TopGivenPotentials,
        _ => StageKind::Joint,
    }
}

/// Training configuration for one named stage, with overrides applied.
pub fn stage_train_config(cfg: &RunConfig, stage: &str, seed: u64) -> TrainConfig {
    let t = &cfg.train;
    let ov = t.stage_overrides.get(stage);
    TrainConfig {
        learning_rate: ov.and_then(|o| o.learning_rate).unwrap_or(t.learning_rate),
        l2: ov.and_then(|o| o.l2).unwrap_or(t.l2),
        minibatch: ov.and_then(|o| o.minibatch).unwrap_or(t.minibatch),
        epochs: ov.and_then(|o| o.epochs).unwrap_or(t.epochs),
        loss_scale: ov.and_then(|o| o.loss_scale).unwrap_or(t.loss_scale),
        saddle: t.saddle.to_config(),
        seed,
        parallel: t.parallel,
    }
}

/// Evaluation mode natural to a model: classical MAP for potential-only
/// models, the saddle loop otherwise.
pub fn natural_mode(model: &StructuredModel) -> InferenceMode {
    if model.has_top() {
        InferenceMode::Saddle
    } else if model.graph.is_chain() {
        InferenceMode::ExactDp
    } else {
        InferenceMode::MessagePassing
    }
}

fn mode_name(mode: InferenceMode) -> &'static str {
    match mode {
        InferenceMode::ExactDp => "exact-dp",
        InferenceMode::MessagePassing => "message-passing",
        InferenceMode::Saddle => "saddle",
        InferenceMode::SpenRelaxed => "spen-relaxed",
    }
}

/// Char-accuracy metrics callback over a train subsample and the full
/// validation split.
fn metric_callback<'a>(
    model: &'a StructuredModel,
    train: &'a Dataset,
    val: &'a Dataset,
    mode: InferenceMode,
    saddle_cfg: &'a SaddleConfig,
    spen_cfg: &'a SpenConfig,
    train_subsample: usize,
) -> impl Fn(&ModelParams) -> nltop_core::Result<(f64, f64)> + Sync + 'a {
    move |params: &ModelParams| {
        let sub = Dataset {
            kind: train.kind,
            num_vars: train.num_vars,
            domain: train.domain,
            feature_dim: train.feature_dim,
            examples: train.examples.iter().take(train_subsample).cloned().collect(),
        };
        let train_report = tasks::evaluate(model, params, &sub, mode, saddle_cfg, spen_cfg)?;
        let val_report = tasks::evaluate(model, params, val, mode, saddle_cfg, spen_cfg)?;
        Ok((train_report.char_accuracy, val_report.char_accuracy))
    }
}

/// One model trained through the staged plan; returns the per-stage outputs
/// and the final (best-validation) parameters.
#[allow(clippy::too_many_arguments)]
pub fn train_staged_model(
    model: &StructuredModel,
    params0: &ModelParams,
    task: &PreparedTask,
    cfg: &RunConfig,
    stages: &[&str],
    seed: u64,
    eval_saddle: &SaddleConfig,
    spen_cfg: &SpenConfig,
) -> CliResult<(ModelParams, Vec<(String, TrainOutput)>)> {
    let mut params = params0.clone();
    let mut outputs = Vec::new();
    for &stage_name in stages {
        let kind = stage_kind(stage_name);
        let train_cfg = stage_train_config(cfg, stage_name, seed);
        // Metric inference: the model as this stage sees it (no top for the
        // potential stages).
        let stage_mode = match kind {
            StageKind::UnaryOnly | StageKind::PairwiseGivenUnary => {
                if model.graph.is_chain() {
                    InferenceMode::ExactDp
                } else {
                    InferenceMode::MessagePassing
                }
            }
            _ => natural_mode(model),
        };
        let callback = metric_callback(
            model,
            &task.train,
            &task.val,
            stage_mode,
            eval_saddle,
            spen_cfg,
            100.min(task.train.len()),
        );
        let metric_ref: MetricFn<'_> = &callback;
        let stage = Stage { kind, cfg: train_cfg };
        let (next, outs) =
            learn::staged_training(model, &params, &task.train.examples, &[stage], Some(metric_ref))?;
        params = next;
        for out in outs {
            outputs.push((stage_name.to_string(), out));
        }
    }
    Ok((params, outputs))
}

fn now_secs() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct RunDir {
    path: PathBuf,
    log: std::fs::File,
}

impl RunDir {
    fn create(path: &Path) -> CliResult<RunDir> {
        std::fs::create_dir_all(path)?;
        let log = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path.join("run.log"))?;
        Ok(RunDir { path: path.to_path_buf(), log })
    }

    fn log(&mut self, message: &str) {
        use std::io::Write;
        let _ = writeln!(self.log, "[{}] {message}", now_secs());
    }

    fn write_file(&self, name: &str, contents: &str) -> CliResult<()> {
        std::fs::write(self.path.join(name), contents)?;
        Ok(())
    }
}

fn dataset_hash(ds: &Dataset) -> CliResult<u64> {
    let mut bytes = Vec::new();
    ds.write_to(&mut bytes)?;
    Ok(fnv1a(&bytes))
}

fn data_hash_table(task: &PreparedTask) -> CliResult<String> {
    Ok(format!(
        "split\texamples\tfnv64\ntrain\t{}\t{:016x}\nval\t{}\t{:016x}\ntest\t{}\t{:016x}\n",
        task.train.len(),
        dataset_hash(&task.train)?,
        task.val.len(),
        dataset_hash(&task.val)?,
        task.test.len(),
        dataset_hash(&task.test)?,
    ))
}

fn metric_line(report: &MetricReport) -> String {
    format!(
        "word_acc={:.4} char_acc={:.4} hamming={:.4} macro_f1={:.4} ({} examples)",
        report.word_accuracy,
        report.char_accuracy,
        report.hamming_loss,
        report.macro_f1,
        report.examples
    )
}

fn metric_tsv_header() -> &'static str {
    "word_accuracy\tchar_accuracy\thamming_loss\tmacro_f1\texamples\tcorrect_examples\tvariables\tcorrect_variables\n"
}

fn metric_tsv_row(r: &MetricReport) -> String {
    format!(
        "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\t{}\t{}\n",
        r.word_accuracy,
        r.char_accuracy,
        r.hamming_loss,
        r.macro_f1,
        r.examples,
        r.correct_examples,
        r.variables,
        r.correct_variables
    )
}

// ---------------------------------------------------------------------------
// gen-data

pub fn cmd_gen_data(config_path: &Path, out: Option<&Path>, seed_override: Option<u64>) -> CliResult<()> {
    let cfg = RunConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(cfg.run.seed);
    let task = prepare_task(&cfg, seed)?;
    let out_dir = out.map(|p| p.to_path_buf()).unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    let data_dir = out_dir.join("data");
    std::fs::create_dir_all(&data_dir)?;
    task.train.save(&data_dir.join("train.nlsd"))?;
    task.val.save(&data_dir.join("val.nlsd"))?;
    task.test.save(&data_dir.join("test.nlsd"))?;
    std::fs::write(out_dir.join("data_hashes.tsv"), data_hash_table(&task)?)?;
    println!(
        "wrote {} train / {} val / {} test examples to {}",
        task.train.len(),
        task.val.len(),
        task.test.len(),
        data_dir.display()
    );
    println!(
        "layout: {} variables, domain {}, feature dim {}",
        task.train.num_vars, task.train.domain, task.train.feature_dim
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// train

pub fn cmd_train(
    config_path: &Path,
    out: Option<&Path>,
    seed_override: Option<u64>,
) -> CliResult<()> {
    let cfg = RunConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(cfg.run.seed);
    let out_dir = out.map(|p| p.to_path_buf()).unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    let mut run_dir = RunDir::create(&out_dir)?;
    run_dir.log(&format!("train starting, seed {seed}"));

    // Snapshot the config verbatim.
    let config_text = std::fs::read_to_string(config_path)?;
    run_dir.write_file("config.toml", &config_text)?;

    let task = prepare_task(&cfg, seed)?;
    run_dir.write_file("data_hashes.tsv", &data_hash_table(&task)?)?;

    let graph = cfg.build_graph(task.train.num_vars, task.train.domain, Some(&task.train))?;
    let spec = ModelSpecText::from_config(&cfg, task.unary_input, graph.total_slots());
    let model = spec.build(graph.clone())?;
    let params0 = model.init_params(seed)?;
    for warning in cfg.train.saddle.to_config().warnings() {
        println!("warning: {warning}");
    }

    let eval_saddle = SaddleConfig { record_trace: false, ..cfg.train.saddle.to_config() };
    let spen_cfg = cfg.eval.spen_config(seed);
    let stages: Vec<&str> = cfg.train.stages.iter().map(|s| s.as_str()).collect();
    let started = std::time::Instant::now();
    let (params, outputs) = train_staged_model(
        &model, &params0, &task, &cfg, &stages, seed, &eval_saddle, &spen_cfg,
    )?;
    run_dir.log(&format!("training finished in {:.1}s", started.elapsed().as_secs_f64()));

    // History table: stage, epoch, surrogate, train metric, val metric.
    // Wall times go to the log, keeping the table byte-stable across runs.
    // Each stage checkpoint records the epochs completed up to its end.
    let mut history = String::from("stage\tepoch\tsurrogate\ttrain_metric\tval_metric\n");
    let mut epochs_completed = 0u64;
    for (stage_name, out) in &outputs {
        for rec in &out.history {
            let _ = writeln!(
                history,
                "{stage_name}\t{}\t{:.6}\t{:.6}\t{:.6}",
                rec.epoch, rec.surrogate, rec.train_metric, rec.val_metric
            );
            run_dir.log(&format!(
                "stage {stage_name} epoch {} took {:.2}s",
                rec.epoch, rec.wall_secs
            ));
            epochs_completed += 1;
        }
        let ckpt = Checkpoint::from_params(&graph, &spec, &out.params, seed, epochs_completed);
        ckpt.save(&out_dir.join(format!("ckpt-{stage_name}.ckpt")))?;
    }
    run_dir.write_file("history.tsv", &history)?;

    let final_ckpt = Checkpoint::from_params(&graph, &spec, &params, seed, epochs_completed);
    final_ckpt.save(&out_dir.join("model.ckpt"))?;

    if let Some((stage_name, out)) = outputs.iter().find(|(_, o)| o.interrupted.is_some()) {
        let reason = out.interrupted.clone().unwrap_or_default();
        run_dir.log(&format!("stage {stage_name} interrupted: {reason}"));
        return Err(CliError::numerical(format!(
            "training halted in stage {stage_name}: {reason}; last good checkpoint saved"
        )));
    }

    // Final evaluation on val and test with the model's natural mode.
    let mode = natural_mode(&model);
    let val_report = tasks::evaluate(&model, &params, &task.val, mode, &eval_saddle, &spen_cfg)?;
    let test_report = tasks::evaluate(&model, &params, &task.test, mode, &eval_saddle, &spen_cfg)?;
    let mut metrics = String::from("split\t");
    metrics.push_str(metric_tsv_header());
    let _ = write!(metrics, "val\t{}", metric_tsv_row(&val_report));
    let _ = write!(metrics, "test\t{}", metric_tsv_row(&test_report));
    run_dir.write_file("metrics.tsv", &metrics)?;

    println!("trained {} stages; checkpoint {}", outputs.len(), out_dir.join("model.ckpt").display());
    println!("val  ({}): {}", mode_name(mode), metric_line(&val_report));
    println!("test ({}): {}", mode_name(mode), metric_line(&test_report));
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

pub fn cmd_eval(
    checkpoint_path: &Path,
    dataset_path: &Path,
    mode_text: &str,
    out: Option<&Path>,
    config_path: Option<&Path>,
) -> CliResult<()> {
    let ckpt = Checkpoint::load(checkpoint_path)?;
    let (model, params) = ckpt.restore()?;
    let dataset = Dataset::load(dataset_path)?;
    let mode = InferenceMode::parse(mode_text)?;
    let (saddle_cfg, spen_cfg) = match config_path {
        Some(p) => {
            let cfg = RunConfig::load(p)?;
            (
                SaddleConfig { record_trace: false, ..cfg.train.saddle.to_config() },
                cfg.eval.spen_config(ckpt.seed),
            )
        }
        None => (
            SaddleConfig { record_trace: false, ..SaddleConfig::default() },
            SpenConfig { seed: ckpt.seed, ..SpenConfig::default() },
        ),
    };
    let report = tasks::evaluate(&model, &params, &dataset, mode, &saddle_cfg, &spen_cfg)?;
    println!("{} on {}: {}", mode_text, dataset_path.display(), metric_line(&report));
    let out_dir = out
        .map(|p| p.to_path_buf())
        .or_else(|| checkpoint_path.parent().map(|p| p.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    let mut table = String::from(metric_tsv_header());
    table.push_str(&metric_tsv_row(&report));
    std::fs::write(out_dir.join(format!("eval-{mode_text}.tsv")), table)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// infer

pub fn cmd_infer(
    checkpoint_path: &Path,
    dataset_path: &Path,
    out: Option<&Path>,
    config_path: Option<&Path>,
) -> CliResult<()> {
    let ckpt = Checkpoint::load(checkpoint_path)?;
    let (model, params) = ckpt.restore()?;
    let dataset = Dataset::load(dataset_path)?;
    let example = dataset
        .examples
        .first()
        .ok_or_else(|| CliError::config("dataset holds no examples"))?;
    let saddle_cfg = match config_path {
        Some(p) => RunConfig::load(p)?.train.saddle.to_config(),
        None => SaddleConfig::default(),
    };
    let saddle_cfg = SaddleConfig { record_trace: true, ..saddle_cfg };
    let f = model.potentials(&params, &example.input)?;
    let top = model.top_transform(&params)?;
    let result =
        nltop_core::saddle::infer(&model.graph, &f, top.as_ref(), None, &saddle_cfg, None, None)?;
    println!("decoded: {:?}", result.assignment.labels);
    println!("truth:   {:?}", example.truth.labels);
    println!(
        "duality gap {:.3e}, prox cap hits {}, mu sweeps {}+{}",
        result.diagnostics.duality_gap,
        result.diagnostics.prox_hit_max,
        result.diagnostics.initial_mu_sweeps,
        result.diagnostics.final_mu_sweeps
    );
    let out_dir = out
        .map(|p| p.to_path_buf())
        .or_else(|| checkpoint_path.parent().map(|p| p.to_path_buf()))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out_dir)?;
    std::fs::write(out_dir.join("infer-trace.tsv"), result.diagnostics.to_table())?;
    println!("trace written to {}", out_dir.join("infer-trace.tsv").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// gradcheck

pub struct GradcheckRow {
    pub block: String,
    pub checked: usize,
    pub max_rel_err: f64,
    pub pass: bool,
}

/// Compare analytic margin gradients against central finite differences on a
/// sample of coordinates per block.
pub fn run_gradcheck(cfg: &RunConfig, seed: u64) -> CliResult<Vec<GradcheckRow>> {
    let task = prepare_task(cfg, seed)?;
    let graph = cfg.build_graph(task.train.num_vars, task.train.domain, Some(&task.train))?;
    let spec = ModelSpecText::from_config(cfg, task.unary_input, graph.total_slots());
    let model = spec.build(graph)?;
    let params = model.init_params(seed)?;
    let example = &task.train.examples[0];
    let use_top = model.has_top();

    // Fix the offending configuration by loss-augmented inference once.
    let f = model.potentials(&params, &example.input)?;
    let loss = loss_vector(&model.graph, &example.truth, cfg.train.loss_scale)?;
    let x_hat = if use_top {
        let top = model.top_transform(&params)?;
        let saddle_cfg =
            SaddleConfig { record_trace: false, ..cfg.train.saddle.to_config() };
        nltop_core::saddle::infer(
            &model.graph,
            &f,
            top.as_ref(),
            Some(&loss),
            &saddle_cfg,
            None,
            None,
        )?
        .assignment
    } else {
        let ones = PotentialVector::constant(model.graph.total_slots(), 1.0);
        let theta = nltop_core::mapsolver::theta_from(&ones, &f, Some(&loss))?;
        nltop_core::mapsolver::map_bruteforce(&model.graph, &theta)
            .or_else(|_| nltop_core::mapsolver::map_chain_dp(&model.graph, &theta))?
            .1
    };

    let (grads, _) =
        example_gradient(&model, &params, &example.input, &example.truth, &x_hat, &f, use_top)?;

    let margin = |p: &ModelParams| -> CliResult<f64> {
        let f = model.potentials(p, &example.input)?;
        let h_hat = model.graph.mask(&f, &x_hat)?;
        let h_true = model.graph.mask(&f, &example.truth)?;
        if use_top {
            let top = model.top_transform(p)?;
            Ok(top.value(&h_hat.values)? - top.value(&h_true.values)?)
        } else {
            Ok(h_hat.values.iter().sum::<f64>() - h_true.values.iter().sum::<f64>())
        }
    };

    let h = 1e-5;
    let coords_per_block = 16;
    let mut rows = Vec::new();
    let mut check_component = |prefix: &str,
                               vector: &nltop_core::diffnet::ParamVector,
                               grad: &nltop_core::diffnet::ParamVector|
     -> CliResult<()> {
        let layout = vector.layout().clone();
        for b in 0..layout.num_blocks() {
            let name = format!("{prefix}.{}", layout.block_name(b));
            let range = layout.block_range(b);
            let len = range.len();
            let mut idx: Vec<usize> = (0..len).collect();
            if len > coords_per_block {
                // Half the sample from the gradient's support (so nonzero
                // values actually get exercised), half uniform.
                let mut r = rng::stream(seed, rng::ns::GRADCHECK, fnv1a(name.as_bytes()));
                let mut support: Vec<usize> = (0..len)
                    .filter(|&i| grad.values[range.start + i] != 0.0)
                    .collect();
                support.shuffle(&mut r);
                support.truncate(coords_per_block / 2);
                idx.shuffle(&mut r);
                idx.truncate(coords_per_block);
                idx.extend(support);
                idx.sort_unstable();
                idx.dedup();
            }
            let mut max_rel = 0.0f64;
            for &i in &idx {
                let flat = range.start + i;
                let perturb = |delta: f64| -> CliResult<f64> {
                    let mut p = ModelParams {
                        unary: params.unary.clone(),
                        pair: params.pair.clone(),
                        top: params.top.clone(),
                    };
                    let target = match prefix {
                        "unary" => &mut p.unary,
                        "pair" => p.pair.as_mut().expect("component exists"),
                        _ => p.top.as_mut().expect("component exists"),
                    };
                    target.values[flat] += delta;
                    margin(&p)
                };
                let fd = (perturb(h)? - perturb(-h)?) / (2.0 * h);
                let analytic = grad.values[flat];
                if analytic.abs() < 1e-10 && fd.abs() < 1e-7 {
                    continue; // both zero within noise
                }
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-6);
                max_rel = max_rel.max(rel);
            }
            rows.push(GradcheckRow {
                block: name,
                checked: idx.len(),
                max_rel_err: max_rel,
                pass: max_rel <= 1e-4,
            });
        }
        Ok(())
    };
    check_component("unary", &params.unary, &grads.unary)?;
    if let (Some(p), Some(g)) = (params.pair.as_ref(), grads.pair.as_ref()) {
        check_component("pair", p, g)?;
    }
    if let (Some(p), Some(g)) = (params.top.as_ref(), grads.top.as_ref()) {
        check_component("top", p, g)?;
    }
    Ok(rows)
}

pub fn cmd_gradcheck(config_path: &Path, seed_override: Option<u64>) -> CliResult<()> {
    let cfg = RunConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(cfg.run.seed);
    let rows = run_gradcheck(&cfg, seed)?;
    println!("block\tchecked\tmax_rel_err\tresult");
    let mut all_pass = true;
    for row in &rows {
        println!(
            "{}\t{}\t{:.3e}\t{}",
            row.block,
            row.checked,
            row.max_rel_err,
            if row.pass { "PASS" } else { "FAIL" }
        );
        all_pass &= row.pass;
    }
    if !all_pass {
        return Err(CliError::numerical("gradient check failed"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench

pub struct BenchRow {
    pub name: String,
    pub train: MetricReport,
    pub test: MetricReport,
}

pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub multilabel: bool,
}

/// Train the baseline ladder on the configured task and evaluate every
/// variant on the train and test splits.
///
/// The stages share work the way the protocol prescribes: unary potentials
/// are trained once, pairwise potentials once on top of them, and the two
/// transformation variants branch from the same fixed potentials.
pub fn run_bench(cfg: &RunConfig, seed: u64) -> CliResult<BenchReport> {
    let task = prepare_task(cfg, seed)?;
    let graph = cfg.build_graph(task.train.num_vars, task.train.domain, Some(&task.train))?;
    let spec = ModelSpecText::from_config(cfg, task.unary_input, graph.total_slots());
    let eval_saddle = SaddleConfig { record_trace: false, ..cfg.train.saddle.to_config() };
    let spen_cfg = cfg.eval.spen_config(seed);
    let multilabel = cfg.task.kind == "multilabel";

    // Potential-only model: unary stage, then pairwise stage.
    let base_spec = spec.with_top("none");
    let base_model = base_spec.build(graph.clone())?;
    let base_params0 = base_model.init_params(seed)?;
    let (unary_params, _) = train_staged_model(
        &base_model, &base_params0, &task, cfg, &["unary"], seed, &eval_saddle, &spen_cfg,
    )?;
    let (potential_params, _) = train_staged_model(
        &base_model, &unary_params, &task, cfg, &["pairwise"], seed, &eval_saddle, &spen_cfg,
    )?;

    // Branch the two transformations from the shared potentials.
    let branch = |top_kind: &str| -> CliResult<(StructuredModel, ModelParams)> {
        let branch_spec = spec.with_top(top_kind);
        let model = branch_spec.build(graph.clone())?;
        let init = model.init_params(seed)?;
        let params0 = ModelParams {
            unary: potential_params.unary.clone(),
            pair: potential_params.pair.clone(),
            top: init.top,
        };
        let (trained, _) = train_staged_model(
            &model, &params0, &task, cfg, &["top"], seed, &eval_saddle, &spen_cfg,
        )?;
        Ok((model, trained))
    };
    let (linear_model, linear_params) = branch("linear")?;
    let top_kind = if spec.top_kind == "none" { "mlp" } else { spec.top_kind.as_str() };
    let (nl_model, nl_params) = branch(top_kind)?;

    let classical = natural_mode(&base_model);
    let eval_pair = |name: &str,
                     model: &StructuredModel,
                     params: &ModelParams,
                     mode: InferenceMode|
     -> CliResult<BenchRow> {
        Ok(BenchRow {
            name: name.to_string(),
            train: tasks::evaluate(model, params, &task.train, mode, &eval_saddle, &spen_cfg)?,
            test: tasks::evaluate(model, params, &task.test, mode, &eval_saddle, &spen_cfg)?,
        })
    };

    let mut rows = vec![
        eval_pair("Unary", &base_model, &unary_params, classical)?,
        eval_pair("DeepStruct", &base_model, &potential_params, classical)?,
        eval_pair("LinearTop", &linear_model, &linear_params, InferenceMode::Saddle)?,
        eval_pair("NLTop", &nl_model, &nl_params, InferenceMode::Saddle)?,
    ];
    if multilabel {
        rows.push(eval_pair("SPENInf", &nl_model, &nl_params, InferenceMode::SpenRelaxed)?);
    }
    Ok(BenchReport { rows, multilabel })
}

pub fn format_bench_table(report: &BenchReport) -> String {
    let mut out = String::new();
    if report.multilabel {
        out.push_str("model\ttrain_hamming\ttest_hamming\ttrain_f1\ttest_f1\n");
        for row in &report.rows {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                row.name,
                row.train.hamming_loss,
                row.test.hamming_loss,
                row.train.macro_f1,
                row.test.macro_f1
            );
        }
    } else {
        out.push_str("model\ttrain_word\ttrain_char\ttest_word\ttest_char\n");
        for row in &report.rows {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
                row.name,
                row.train.word_accuracy,
                row.train.char_accuracy,
                row.test.word_accuracy,
                row.test.char_accuracy
            );
        }
    }
    out
}

pub fn cmd_bench(config_path: &Path, out: Option<&Path>, seed_override: Option<u64>) -> CliResult<()> {
    let cfg = RunConfig::load(config_path)?;
    let seed = seed_override.unwrap_or(cfg.run.seed);
    let started = std::time::Instant::now();
    let report = run_bench(&cfg, seed)?;
    let table = format_bench_table(&report);
    print!("{table}");
    let out_dir = out.map(|p| p.to_path_buf()).unwrap_or_else(|| PathBuf::from(&cfg.run.out_dir));
    let mut run_dir = RunDir::create(&out_dir)?;
    run_dir.write_file("bench.tsv", &table)?;
    run_dir.log(&format!("bench seed {seed} finished in {:.1}s", started.elapsed().as_secs_f64()));
    Ok(())
}
