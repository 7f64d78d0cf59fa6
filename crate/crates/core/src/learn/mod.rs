//! Structured max-margin learning over all model parameters.
//!
//! The objective is the regularized structured hinge: for each example,
//! loss-augmented inference proposes the strongest offending configuration
//! `x_hat`, and the gradient of
//! `T(H(x_hat)) - T(H(x_true))` flows through the transformation, the masked
//! potential slots, the unary networks, and the pair tables. Updates are
//! plain minibatch SGD, `w <- w - alpha (C w + g)`, with weight decay skipped
//! for frozen blocks.

mod model;

pub use model::{
    ExampleInput, ModelParams, PairBlockId, PairSpec, StructuredModel, TopInit, TopSpec,
    UnaryKind,
};

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mapsolver::{self, map_chain_dp, minimize_dual, spen_relaxed_infer, SpenConfig};
use crate::regiongraph::{Assignment, PotentialVector, RegionGraph};
use crate::rng;
use crate::saddle::{self, InferenceResult, SaddleConfig};

/// One training example: conditioning input and ground-truth configuration.
#[derive(Debug, Clone)]
pub struct Example {
    pub input: ExampleInput,
    pub truth: Assignment,
}

/// Minibatch SGD controls.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Step size `alpha`.
    pub learning_rate: f64,
    /// L2 weight `C`.
    pub l2: f64,
    pub minibatch: usize,
    pub epochs: usize,
    /// Per-variable Hamming weight in the loss augmentation.
    pub loss_scale: f64,
    pub saddle: SaddleConfig,
    pub seed: u64,
    /// Run per-example inference of a minibatch in parallel (gradients are
    /// still reduced in example order, so results do not change).
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            l2: 1e-4,
            minibatch: 10,
            epochs: 10,
            loss_scale: 1.0,
            saddle: SaddleConfig { record_trace: false, ..SaddleConfig::default() },
            seed: 0,
            parallel: true,
        }
    }
}

/// Hamming distance between two assignments.
pub fn hamming(a: &Assignment, b: &Assignment) -> usize {
    a.labels.iter().zip(&b.labels).filter(|(x, y)| x != y).count()
}

/// Per-variable Hamming loss vector: unary slot `(k, s)` carries
/// `scale` when `s` differs from the truth, higher-order slots stay zero.
pub fn loss_vector(graph: &RegionGraph, truth: &Assignment, scale: f64) -> Result<PotentialVector> {
    if truth.labels.len() != graph.num_vars() {
        return Err(Error::structure("truth assignment does not match graph"));
    }
    let mut out = PotentialVector::zeros(graph.total_slots());
    for (k, &label) in truth.labels.iter().enumerate() {
        let offset = graph.region_offset(k);
        for s in 0..graph.domain(k) {
            if s != label {
                out.values[offset + s] = scale;
            }
        }
    }
    Ok(out)
}

/// Loss-augmented saddle-point inference: identical to [`saddle::infer`]
/// except every `theta` construction adds the Hamming loss vector.
pub fn loss_augmented_infer(
    model: &StructuredModel,
    params: &ModelParams,
    input: &ExampleInput,
    truth: &Assignment,
    loss_scale: f64,
    cfg: &SaddleConfig,
) -> Result<InferenceResult> {
    let f = model.potentials(params, input)?;
    let loss = loss_vector(&model.graph, truth, loss_scale)?;
    let top = model.top_transform(params)?;
    saddle::infer(&model.graph, &f, top.as_ref(), Some(&loss), cfg, None, None)
}

/// Classical loss-augmented MAP on `f + loss` (sum scoring): exact dynamic
/// programming on chains, message passing otherwise.
fn loss_augmented_map(
    graph: &RegionGraph,
    f: &PotentialVector,
    loss: &PotentialVector,
    cfg: &SaddleConfig,
) -> Result<Assignment> {
    let ones = PotentialVector::constant(graph.total_slots(), 1.0);
    let theta = mapsolver::theta_from(&ones, f, Some(loss))?;
    match map_chain_dp(graph, &theta) {
        Ok((_, x)) => Ok(x),
        Err(_) => {
            let solve = minimize_dual(graph, &theta, cfg.mu_max_sweeps, cfg.mu_tol)?;
            mapsolver::decode(graph, &solve.messages, &theta)
        }
    }
}

/// Transformed scores of the offending and ground-truth configurations.
#[derive(Debug, Clone, Copy)]
pub struct MarginTerms {
    pub transformed_hat: f64,
    pub transformed_true: f64,
}

/// Gradient of `T(H(x_hat)) - T(H(x_true))` with respect to every trainable
/// block, at fixed `x_hat`.
///
/// With `use_top = false` the transformation is the plain sum regardless of
/// the model's top, matching the staged protocol for potential-only models.
pub fn example_gradient(
    model: &StructuredModel,
    params: &ModelParams,
    input: &ExampleInput,
    truth: &Assignment,
    x_hat: &Assignment,
    f: &PotentialVector,
    use_top: bool,
) -> Result<(ModelParams, MarginTerms)> {
    let graph = &model.graph;
    let h_hat = graph.mask(f, x_hat)?;
    let h_true = graph.mask(f, truth)?;
    let mut grads = params.zeros_like();

    // Cotangent on the potential slots plus the transformation's own
    // parameter gradient.
    let mut cot_f = vec![0.0; graph.total_slots()];
    let margin;
    match (use_top, model.top_net()) {
        (true, Some(net)) => {
            let scale = model.top_input_scale();
            let top_params = params
                .top
                .as_ref()
                .ok_or_else(|| Error::structure("missing top parameters"))?;
            let scaled_hat: Vec<f64> = h_hat.values.iter().map(|v| v * scale).collect();
            let scaled_true: Vec<f64> = h_true.values.iter().map(|v| v * scale).collect();
            let t_hat = net.forward(top_params, &scaled_hat)?[0];
            let t_true = net.forward(top_params, &scaled_true)?[0];
            let (gin_hat, gp_hat) = net.vjp(top_params, &scaled_hat, &[1.0])?;
            let (gin_true, gp_true) = net.vjp(top_params, &scaled_true, &[1.0])?;
            let top_grad = grads.top.as_mut().expect("grads mirror params");
            for i in 0..top_grad.len() {
                top_grad.values[i] = gp_hat.values[i] - gp_true.values[i];
            }
            for r in 0..graph.num_regions() {
                let slot_hat = graph.selected_slot(r, x_hat);
                let slot_true = graph.selected_slot(r, truth);
                cot_f[slot_hat] += scale * gin_hat[slot_hat];
                cot_f[slot_true] -= scale * gin_true[slot_true];
            }
            margin = MarginTerms { transformed_hat: t_hat, transformed_true: t_true };
        }
        _ => {
            // Sum transformation: unit cotangent on each selected slot.
            let t_hat: f64 = h_hat.values.iter().sum();
            let t_true: f64 = h_true.values.iter().sum();
            for r in 0..graph.num_regions() {
                cot_f[graph.selected_slot(r, x_hat)] += 1.0;
                cot_f[graph.selected_slot(r, truth)] -= 1.0;
            }
            margin = MarginTerms { transformed_hat: t_hat, transformed_true: t_true };
        }
    }

    // Unary networks.
    match (model.unary_kind, input) {
        (UnaryKind::PerVariable, ExampleInput::PerVariable(feats)) => {
            for (k, feat) in feats.iter().enumerate() {
                let offset = graph.region_offset(k);
                let d = graph.domain(k);
                let cot = &cot_f[offset..offset + d];
                if cot.iter().all(|&c| c == 0.0) {
                    continue;
                }
                let (_, gp) = model.unary_net.vjp(&params.unary, feat, cot)?;
                crate::numeric::axpy(1.0, &gp.values, &mut grads.unary.values);
            }
        }
        (UnaryKind::GlobalBinary, ExampleInput::Global(feat)) => {
            // antisymmetric split: d f_k(1) / d out_k = 1/2, d f_k(0) = -1/2
            let cot: Vec<f64> = (0..graph.num_vars())
                .map(|k| {
                    let offset = graph.region_offset(k);
                    0.5 * (cot_f[offset + 1] - cot_f[offset])
                })
                .collect();
            if cot.iter().any(|&c| c != 0.0) {
                let (_, gp) = model.unary_net.vjp(&params.unary, feat, &cot)?;
                crate::numeric::axpy(1.0, &gp.values, &mut grads.unary.values);
            }
        }
        _ => return Err(Error::structure("example input kind does not match the model")),
    }

    // Pair tables: only the selected slots carry cotangent.
    if let Some(pair_grads) = grads.pair.as_mut() {
        for (edge, (r, _)) in graph.higher_regions().enumerate() {
            let (table, block) = model
                .pair_block_for_edge(edge)
                .ok_or_else(|| Error::structure("pair component missing"))?;
            let mut local = vec![0.0; table.param_len()];
            let vars = &graph.region(r).vars;
            let offset = graph.region_offset(r);
            let mut slots = vec![graph.selected_slot(r, x_hat)];
            let slot_true = graph.selected_slot(r, truth);
            if slot_true != slots[0] {
                slots.push(slot_true);
            }
            for slot in slots {
                let c = cot_f[slot];
                if c == 0.0 {
                    continue;
                }
                let local_idx = slot - offset;
                let cols = graph.domain(vars[1]);
                table.accumulate_grad(&mut local, local_idx / cols, local_idx % cols, c)?;
            }
            block.scatter_add(&local, pair_grads)?;
        }
    }

    Ok((grads, margin))
}

/// Named frozen blocks; frozen blocks get neither gradient steps nor decay.
#[derive(Debug, Clone, Default)]
pub struct FrozenSet {
    names: BTreeSet<String>,
}

impl FrozenSet {
    pub fn none() -> Self {
        FrozenSet::default()
    }

    /// Resolve freeze specs against a parameter set. A spec names either a
    /// whole component (`unary`, `pair`, `top`) or a single block
    /// (`unary.w0`); unknown names are structural errors.
    pub fn from_specs(params: &ModelParams, specs: &[String]) -> Result<Self> {
        let all = params.block_names();
        let mut names = BTreeSet::new();
        for spec in specs {
            let mut matched = false;
            for name in &all {
                if name == spec || name.starts_with(&format!("{spec}.")) {
                    names.insert(name.clone());
                    matched = true;
                }
            }
            if !matched {
                return Err(Error::structure(format!("unknown parameter block {spec:?}")));
            }
        }
        Ok(FrozenSet { names })
    }

    pub fn all(params: &ModelParams) -> Self {
        FrozenSet { names: params.block_names().into_iter().collect() }
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    /// True when every block of the given component prefix is frozen.
    pub fn covers_component(&self, params: &ModelParams, prefix: &str) -> bool {
        params
            .block_names()
            .iter()
            .filter(|n| n.starts_with(&format!("{prefix}.")))
            .all(|n| self.names.contains(n))
    }
}

fn update_component(
    prefix: &str,
    values: &mut crate::diffnet::ParamVector,
    grads: &crate::diffnet::ParamVector,
    lr: f64,
    l2: f64,
    frozen: &FrozenSet,
) {
    let layout = values.layout().clone();
    for i in 0..layout.num_blocks() {
        let name = format!("{prefix}.{}", layout.block_name(i));
        if frozen.is_frozen(&name) {
            continue;
        }
        let range = layout.block_range(i);
        for j in range {
            values.values[j] -= lr * (l2 * values.values[j] + grads.values[j]);
        }
    }
}

fn apply_update(
    params: &mut ModelParams,
    grads: &ModelParams,
    lr: f64,
    l2: f64,
    frozen: &FrozenSet,
) {
    update_component("unary", &mut params.unary, &grads.unary, lr, l2, frozen);
    if let (Some(p), Some(g)) = (params.pair.as_mut(), grads.pair.as_ref()) {
        update_component("pair", p, g, lr, l2, frozen);
    }
    if let (Some(p), Some(g)) = (params.top.as_mut(), grads.top.as_ref()) {
        update_component("top", p, g, lr, l2, frozen);
    }
}

fn add_grads(dst: &mut ModelParams, src: &ModelParams) {
    crate::numeric::axpy(1.0, &src.unary.values, &mut dst.unary.values);
    if let (Some(d), Some(s)) = (dst.pair.as_mut(), src.pair.as_ref()) {
        crate::numeric::axpy(1.0, &s.values, &mut d.values);
    }
    if let (Some(d), Some(s)) = (dst.top.as_mut(), src.top.as_ref()) {
        crate::numeric::axpy(1.0, &s.values, &mut d.values);
    }
}

fn params_finite(params: &ModelParams) -> bool {
    crate::numeric::all_finite(&params.unary.values)
        && params.pair.as_ref().is_none_or(|p| crate::numeric::all_finite(&p.values))
        && params.top.as_ref().is_none_or(|p| crate::numeric::all_finite(&p.values))
}

/// One epoch row of the training history.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Regularized hinge objective with the inferred configurations.
    pub surrogate: f64,
    pub train_metric: f64,
    pub val_metric: f64,
    pub wall_secs: f64,
}

/// Training result; `params` is the best-validation checkpoint when a metric
/// callback was supplied, the final iterate otherwise.
#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    pub final_params: ModelParams,
    /// Epoch of the returned checkpoint; `None` means the initial parameters
    /// were never beaten on validation.
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
    /// Set when training halted on a numerical failure; `params` then holds
    /// the last good state.
    pub interrupted: Option<String>,
}

impl TrainOutput {
    /// Tab-separated history: epoch, surrogate objective, train metric,
    /// validation metric, wall seconds.
    pub fn history_table(&self) -> String {
        let mut out = String::from("epoch\tsurrogate\ttrain_metric\tval_metric\twall_secs\n");
        for rec in &self.history {
            out.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{:.3}\n",
                rec.epoch, rec.surrogate, rec.train_metric, rec.val_metric, rec.wall_secs
            ));
        }
        out
    }
}

/// Callback reporting `(train_metric, val_metric)`; higher is better.
pub type MetricFn<'a> = &'a (dyn Fn(&ModelParams) -> Result<(f64, f64)> + Sync);

/// Minibatch max-margin training.
///
/// Examples of each minibatch run loss-augmented inference (in parallel when
/// configured), gradients accumulate in example-index order, and one update
/// `w <- w - alpha (C w + g)` is applied per minibatch. Epoch shuffling draws
/// from the run seed, so identical inputs give bit-identical parameters.
pub fn train(
    model: &StructuredModel,
    params0: &ModelParams,
    train_set: &[Example],
    cfg: &TrainConfig,
    frozen: &FrozenSet,
    use_top: bool,
    metrics: Option<MetricFn<'_>>,
) -> Result<TrainOutput> {
    if train_set.is_empty() {
        return Err(Error::structure("training set is empty"));
    }
    if cfg.minibatch == 0 || cfg.learning_rate <= 0.0 || cfg.l2 < 0.0 {
        return Err(Error::structure("invalid training configuration"));
    }
    let mut params = params0.clone();
    let mut history = Vec::new();
    // The initial parameters are a candidate checkpoint: a stage that never
    // improves validation keeps its starting point.
    let mut best_metric = match metrics {
        Some(cb) => cb(&params)?.1,
        None => f64::NEG_INFINITY,
    };
    let mut best_epoch: Option<usize> = None;
    let mut best_params = params.clone();
    let mut interrupted = None;

    // Potentials are constant when both bottom components are frozen.
    let potentials_frozen = frozen.covers_component(&params, "unary")
        && (params.pair.is_none() || frozen.covers_component(&params, "pair"));
    let cached_f: Option<Vec<PotentialVector>> = if potentials_frozen {
        Some(
            train_set
                .iter()
                .map(|ex| model.potentials(&params, &ex.input))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    let losses: Vec<PotentialVector> = train_set
        .iter()
        .map(|ex| loss_vector(&model.graph, &ex.truth, cfg.loss_scale))
        .collect::<Result<_>>()?;

    'epochs: for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_start_params = params.clone();
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut rng::stream(cfg.seed, rng::ns::SHUFFLE, epoch as u64));
        let mut margin_sum = 0.0;

        for chunk in order.chunks(cfg.minibatch) {
            let infer_one = |&i: &usize| -> Result<(usize, PotentialVector, Assignment)> {
                let ex = &train_set[i];
                let f = match &cached_f {
                    Some(cache) => cache[i].clone(),
                    None => model.potentials(&params, &ex.input)?,
                };
                let x_hat = if use_top && model.has_top() {
                    let top = model.top_transform(&params)?;
                    saddle::infer(
                        &model.graph,
                        &f,
                        top.as_ref(),
                        Some(&losses[i]),
                        &cfg.saddle,
                        None,
                        None,
                    )?
                    .assignment
                } else {
                    loss_augmented_map(&model.graph, &f, &losses[i], &cfg.saddle)?
                };
                Ok((i, f, x_hat))
            };
            let inferred: Result<Vec<_>> = if cfg.parallel {
                chunk.par_iter().map(infer_one).collect()
            } else {
                chunk.iter().map(infer_one).collect()
            };
            let inferred = match inferred {
                Ok(v) => v,
                Err(Error::Numerical { iteration, detail, .. }) => {
                    interrupted =
                        Some(format!("inference failed at iteration {iteration}: {detail}"));
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };

            let mut grads = params.zeros_like();
            for (i, f, x_hat) in &inferred {
                let ex = &train_set[*i];
                let (g, margin) =
                    example_gradient(model, &params, &ex.input, &ex.truth, x_hat, f, use_top)?;
                add_grads(&mut grads, &g);
                margin_sum += margin.transformed_hat - margin.transformed_true
                    + cfg.loss_scale * hamming(x_hat, &ex.truth) as f64;
            }
            if !params_finite(&grads) {
                interrupted = Some("non-finite gradient".into());
                break 'epochs;
            }
            apply_update(&mut params, &grads, cfg.learning_rate, cfg.l2, frozen);
            if !params_finite(&params) {
                interrupted = Some("non-finite parameters after update".into());
                params = epoch_start_params;
                break 'epochs;
            }
        }

        let surrogate = 0.5 * cfg.l2 * params.squared_norm() + margin_sum;
        let (train_metric, val_metric) = match metrics {
            Some(cb) => cb(&params)?,
            None => (f64::NAN, f64::NAN),
        };
        history.push(EpochRecord {
            epoch,
            surrogate,
            train_metric,
            val_metric,
            wall_secs: started.elapsed().as_secs_f64(),
        });
        if metrics.is_some() && val_metric > best_metric {
            best_metric = val_metric;
            best_epoch = Some(epoch);
            best_params = params.clone();
        }
    }

    let (params_out, best_epoch) = if metrics.is_some() && interrupted.is_none() {
        (best_params, best_epoch)
    } else {
        (params.clone(), history.len().checked_sub(1))
    };
    Ok(TrainOutput {
        params: params_out,
        final_params: params,
        best_epoch,
        history,
        interrupted,
    })
}

/// Stages of the training protocol, each freezing the complementary blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageKind {
    /// Train the unary networks with sum scoring (pair and top frozen).
    UnaryOnly,
    /// Train pair tables on top of fixed unaries (sum scoring).
    PairwiseGivenUnary,
    /// Train the transformation on fixed potentials (saddle inference).
    TopGivenPotentials,
    /// Train everything (saddle inference when a top exists).
    Joint,
}

impl StageKind {
    fn frozen_specs(&self, params: &ModelParams) -> Vec<String> {
        let mut out = Vec::new();
        let has_pair = params.pair.is_some();
        let has_top = params.top.is_some();
        match self {
            StageKind::UnaryOnly => {
                if has_pair {
                    out.push("pair".into());
                }
                if has_top {
                    out.push("top".into());
                }
            }
            StageKind::PairwiseGivenUnary => {
                out.push("unary".into());
                if has_top {
                    out.push("top".into());
                }
            }
            StageKind::TopGivenPotentials => {
                out.push("unary".into());
                if has_pair {
                    out.push("pair".into());
                }
            }
            StageKind::Joint => {}
        }
        out
    }

    fn uses_top(&self) -> bool {
        matches!(self, StageKind::TopGivenPotentials | StageKind::Joint)
    }
}

/// One stage: a kind plus its own training configuration.
#[derive(Debug, Clone)]
pub struct Stage {
    pub kind: StageKind,
    pub cfg: TrainConfig,
}

/// Run a staged plan, threading the best parameters through the stages.
pub fn staged_training(
    model: &StructuredModel,
    params0: &ModelParams,
    train_set: &[Example],
    stages: &[Stage],
    metrics: Option<MetricFn<'_>>,
) -> Result<(ModelParams, Vec<TrainOutput>)> {
    let mut params = params0.clone();
    let mut outputs = Vec::new();
    for stage in stages {
        let frozen = FrozenSet::from_specs(&params, &stage.kind.frozen_specs(&params))?;
        let out = train(
            model,
            &params,
            train_set,
            &stage.cfg,
            &frozen,
            stage.kind.uses_top(),
            metrics,
        )?;
        params = out.params.clone();
        let failed = out.interrupted.clone();
        outputs.push(out);
        if let Some(reason) = failed {
            return Err(Error::Numerical {
                iteration: outputs.len(),
                detail: format!("stage halted: {reason}"),
                trace: Vec::new(),
            });
        }
    }
    Ok((params, outputs))
}

/// Inference modes for evaluation-time decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    ExactDp,
    MessagePassing,
    Saddle,
    SpenRelaxed,
}

impl InferenceMode {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(match text {
            "exact-dp" => InferenceMode::ExactDp,
            "message-passing" => InferenceMode::MessagePassing,
            "saddle" => InferenceMode::Saddle,
            "spen-relaxed" => InferenceMode::SpenRelaxed,
            other => {
                return Err(Error::parse(format!(
                    "unknown inference mode {other:?} (expected exact-dp, message-passing, saddle, spen-relaxed)"
                )))
            }
        })
    }
}

/// Decode one example under the chosen inference mode.
pub fn predict(
    model: &StructuredModel,
    params: &ModelParams,
    input: &ExampleInput,
    mode: InferenceMode,
    saddle_cfg: &SaddleConfig,
    spen_cfg: &SpenConfig,
) -> Result<Assignment> {
    let f = model.potentials(params, input)?;
    let graph = &model.graph;
    match mode {
        InferenceMode::ExactDp => Ok(map_chain_dp(graph, &f)?.1),
        InferenceMode::MessagePassing => {
            let solve = minimize_dual(graph, &f, saddle_cfg.mu_max_sweeps, saddle_cfg.mu_tol)?;
            mapsolver::decode(graph, &solve.messages, &f)
        }
        InferenceMode::Saddle => {
            let top = model.top_transform(params)?;
            Ok(saddle::infer(graph, &f, top.as_ref(), None, saddle_cfg, None, None)?.assignment)
        }
        InferenceMode::SpenRelaxed => {
            let top = model.top_transform(params)?;
            spen_relaxed_infer(graph, &f, top.as_ref(), spen_cfg)
        }
    }
}
