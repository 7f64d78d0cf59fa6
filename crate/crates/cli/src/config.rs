//! Run configuration: a strict TOML schema with explicit sections. Unknown
//! keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use nltop_core::diffnet::{Activation, DiffNet, PairTable, SymmetryMode};
use nltop_core::learn::{PairSpec, StructuredModel, TopInit, TopSpec, UnaryKind};
use nltop_core::mapsolver::SpenConfig;
use nltop_core::regiongraph::RegionGraph;
use nltop_core::saddle::SaddleConfig;
use nltop_core::tasks::{
    self, Dataset, MultilabelTaskSpec, NoiseParams, WordTaskSpec,
};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub task: TaskSection,
    pub graph: GraphSection,
    pub model: ModelSection,
    pub train: TrainSection,
    #[serde(default)]
    pub eval: EvalSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub out_dir: String,
    #[serde(default)]
    pub threads: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: String,
    #[serde(default)]
    pub words: Option<WordsSection>,
    #[serde(default)]
    pub multilabel: Option<MultilabelSection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum VocabularyChoice {
    Named(String),
    Explicit(Vec<String>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordsSection {
    pub vocabulary: VocabularyChoice,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    #[serde(default = "default_rotation")]
    pub rotation_deg: f64,
    #[serde(default = "default_shift")]
    pub shift_px: f64,
    #[serde(default = "default_scale_min")]
    pub scale_min: f64,
    #[serde(default = "default_scale_max")]
    pub scale_max: f64,
    #[serde(default = "default_bg_lo")]
    pub bg_lo: f64,
    #[serde(default = "default_bg_hi")]
    pub bg_hi: f64,
    #[serde(default)]
    pub compact_alphabet: bool,
}

fn default_rotation() -> f64 {
    15.0
}
fn default_shift() -> f64 {
    3.0
}
fn default_scale_min() -> f64 {
    0.7
}
fn default_scale_max() -> f64 {
    1.1
}
fn default_bg_lo() -> f64 {
    0.3
}
fn default_bg_hi() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultilabelSection {
    pub labels: usize,
    pub feature_dim: usize,
    pub pair_budget: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    #[serde(default = "default_bias_scale")]
    pub bias_scale: f64,
    #[serde(default = "default_coupling_scale")]
    pub coupling_scale: f64,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
}

fn default_bias_scale() -> f64 {
    0.5
}
fn default_coupling_scale() -> f64 {
    1.0
}
fn default_noise_sigma() -> f64 {
    0.4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    /// chain | second-order | fully-connected | selected-pairs | custom
    pub kind: String,
    /// Only for kind = custom: the textual graph description.
    #[serde(default)]
    pub description: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub unary_hidden: usize,
    #[serde(default = "default_relu")]
    pub unary_activation: String,
    /// none | shared | shared-tied | per-edge | per-edge-tied
    pub pair: String,
    /// none | linear | mlp
    pub top: String,
    /// 0 means "equal to the slot-vector length".
    #[serde(default)]
    pub top_hidden: usize,
    #[serde(default = "default_sigmoid")]
    pub top_activation: String,
    #[serde(default = "default_identity_ones")]
    pub top_init: String,
    #[serde(default = "default_one")]
    pub top_input_scale: f64,
}

fn default_relu() -> String {
    "relu".into()
}
fn default_sigmoid() -> String {
    "sigmoid".into()
}
fn default_identity_ones() -> String {
    "identity-ones".into()
}
fn default_one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub l2: f64,
    pub minibatch: usize,
    pub epochs: usize,
    #[serde(default = "default_one")]
    pub loss_scale: f64,
    /// Stage names: unary | pairwise | top | joint.
    pub stages: Vec<String>,
    #[serde(default)]
    pub stage_overrides: BTreeMap<String, StageOverride>,
    #[serde(default)]
    pub saddle: SaddleSection,
    #[serde(default = "default_true")]
    pub parallel: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct StageOverride {
    pub learning_rate: Option<f64>,
    pub l2: Option<f64>,
    pub minibatch: Option<usize>,
    pub epochs: Option<usize>,
    pub loss_scale: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaddleSection {
    #[serde(default = "default_half")]
    pub alpha_y: f64,
    #[serde(default = "default_half")]
    pub alpha_lambda: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_prox_max_iters")]
    pub prox_max_iters: usize,
    #[serde(default = "default_one")]
    pub prox_step: f64,
    #[serde(default = "default_prox_tol")]
    pub prox_tol: f64,
    #[serde(default)]
    pub resolve_mu_every: usize,
    #[serde(default = "default_mu_max_sweeps")]
    pub mu_max_sweeps: usize,
    #[serde(default = "default_mu_tol")]
    pub mu_tol: f64,
    #[serde(default)]
    pub record_trace: bool,
}

fn default_half() -> f64 {
    0.5
}
fn default_iterations() -> usize {
    100
}
fn default_prox_max_iters() -> usize {
    50
}
fn default_prox_tol() -> f64 {
    1e-8
}
fn default_mu_max_sweeps() -> usize {
    200
}
fn default_mu_tol() -> f64 {
    1e-12
}

impl Default for SaddleSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

impl SaddleSection {
    pub fn to_config(&self) -> SaddleConfig {
        SaddleConfig {
            alpha_y: self.alpha_y,
            alpha_lambda: self.alpha_lambda,
            iterations: self.iterations,
            prox_max_iters: self.prox_max_iters,
            prox_step: self.prox_step,
            prox_tol: self.prox_tol,
            resolve_mu_every: self.resolve_mu_every,
            mu_max_sweeps: self.mu_max_sweeps,
            mu_tol: self.mu_tol,
            record_trace: self.record_trace,
            record_iterates: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default = "default_spen_steps")]
    pub spen_steps: usize,
    #[serde(default = "default_spen_step_size")]
    pub spen_step_size: f64,
    #[serde(default = "default_spen_restarts")]
    pub spen_restarts: usize,
}

fn default_mode() -> String {
    "saddle".into()
}
fn default_spen_steps() -> usize {
    100
}
fn default_spen_step_size() -> f64 {
    0.1
}
fn default_spen_restarts() -> usize {
    5
}

impl Default for EvalSection {
    fn default() -> Self {
        toml::from_str("").expect("all fields defaulted")
    }
}

impl EvalSection {
    pub fn spen_config(&self, seed: u64) -> SpenConfig {
        SpenConfig {
            steps: self.spen_steps,
            step_size: self.spen_step_size,
            restarts: self.spen_restarts,
            seed,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        match self.task.kind.as_str() {
            "words" => {
                if self.task.words.is_none() {
                    return Err(CliError::config("task.kind = words needs a [task.words] section"));
                }
                if self.task.multilabel.is_some() {
                    return Err(CliError::config(
                        "[task.multilabel] present but task.kind is words",
                    ));
                }
            }
            "multilabel" => {
                if self.task.multilabel.is_none() {
                    return Err(CliError::config(
                        "task.kind = multilabel needs a [task.multilabel] section",
                    ));
                }
                if self.task.words.is_some() {
                    return Err(CliError::config(
                        "[task.words] present but task.kind is multilabel",
                    ));
                }
            }
            other => {
                return Err(CliError::config(format!(
                    "unknown task.kind {other:?} (expected words or multilabel)"
                )))
            }
        }
        for stage in &self.train.stages {
            if !matches!(stage.as_str(), "unary" | "pairwise" | "top" | "joint") {
                return Err(CliError::config(format!(
                    "unknown stage {stage:?} (expected unary, pairwise, top, joint)"
                )));
            }
        }
        for key in self.train.stage_overrides.keys() {
            if !self.train.stages.iter().any(|s| s == key) {
                return Err(CliError::config(format!(
                    "stage_overrides.{key} does not match any configured stage"
                )));
            }
        }
        parse_activation(&self.model.unary_activation)?;
        parse_activation(&self.model.top_activation)?;
        if !matches!(self.model.top.as_str(), "none" | "linear" | "mlp") {
            return Err(CliError::config(format!(
                "unknown model.top {:?} (expected none, linear, mlp)",
                self.model.top
            )));
        }
        if !matches!(self.model.top_init.as_str(), "identity-ones" | "glorot") {
            return Err(CliError::config(format!(
                "unknown model.top_init {:?} (expected identity-ones, glorot)",
                self.model.top_init
            )));
        }
        if !matches!(
            self.model.pair.as_str(),
            "none" | "shared" | "shared-tied" | "per-edge" | "per-edge-tied"
        ) {
            return Err(CliError::config(format!(
                "unknown model.pair {:?} (expected none, shared, shared-tied, per-edge, per-edge-tied)",
                self.model.pair
            )));
        }
        if !matches!(
            self.graph.kind.as_str(),
            "chain" | "second-order" | "fully-connected" | "selected-pairs" | "custom"
        ) {
            return Err(CliError::config(format!(
                "unknown graph.kind {:?}",
                self.graph.kind
            )));
        }
        if self.graph.kind == "custom" && self.graph.description.is_none() {
            return Err(CliError::config("graph.kind = custom needs graph.description"));
        }
        if self.graph.kind == "selected-pairs" && self.task.kind != "multilabel" {
            return Err(CliError::config("graph.kind = selected-pairs requires the multilabel task"));
        }
        Ok(())
    }

    pub fn word_spec(&self, seed: u64) -> CliResult<WordTaskSpec> {
        let w = self.task.words.as_ref().ok_or_else(|| CliError::config("not a word task"))?;
        let vocabulary = match &w.vocabulary {
            VocabularyChoice::Named(name) => match name.as_str() {
                "full" => tasks::FULL_VOCABULARY.iter().map(|s| s.to_string()).collect(),
                "reduced" => tasks::REDUCED_VOCABULARY.iter().map(|s| s.to_string()).collect(),
                other => {
                    return Err(CliError::config(format!(
                        "unknown vocabulary {other:?} (expected full, reduced, or a word list)"
                    )))
                }
            },
            VocabularyChoice::Explicit(words) => words.clone(),
        };
        Ok(WordTaskSpec {
            vocabulary,
            train: w.train,
            val: w.val,
            test: w.test,
            seed,
            noise: NoiseParams {
                rotation_deg: w.rotation_deg,
                shift_px: w.shift_px,
                scale_min: w.scale_min,
                scale_max: w.scale_max,
                bg_lo: w.bg_lo,
                bg_hi: w.bg_hi,
            },
            compact_alphabet: w.compact_alphabet,
        })
    }

    pub fn multilabel_spec(&self, seed: u64) -> CliResult<MultilabelTaskSpec> {
        let m = self
            .task
            .multilabel
            .as_ref()
            .ok_or_else(|| CliError::config("not a multilabel task"))?;
        Ok(MultilabelTaskSpec {
            labels: m.labels,
            feature_dim: m.feature_dim,
            pair_budget: m.pair_budget,
            train: m.train,
            val: m.val,
            test: m.test,
            seed,
            bias_scale: m.bias_scale,
            coupling_scale: m.coupling_scale,
            noise_sigma: m.noise_sigma,
        })
    }

    /// Build the region graph. `train_data` supplies co-occurrence counts for
    /// selected-pairs graphs.
    pub fn build_graph(&self, num_vars: usize, domain: usize, train_data: Option<&Dataset>) -> CliResult<RegionGraph> {
        let graph = match self.graph.kind.as_str() {
            "chain" => RegionGraph::build_chain(num_vars, domain)?,
            "second-order" => RegionGraph::build_second_order(num_vars, domain)?,
            "fully-connected" => RegionGraph::build_fully_connected(num_vars, domain)?,
            "selected-pairs" => {
                let data = train_data.ok_or_else(|| {
                    CliError::config("selected-pairs graph needs the training dataset")
                })?;
                let budget = self
                    .task
                    .multilabel
                    .as_ref()
                    .map(|m| m.pair_budget)
                    .ok_or_else(|| CliError::config("selected-pairs graph needs pair_budget"))?;
                let pairs = tasks::select_pairs(data, budget)?;
                RegionGraph::new(vec![domain; num_vars], pairs)?
            }
            "custom" => RegionGraph::parse_description(
                self.graph.description.as_ref().expect("validated"),
            )?,
            _ => unreachable!("validated"),
        };
        Ok(graph)
    }
}

pub fn parse_activation(name: &str) -> CliResult<Activation> {
    Ok(match name {
        "relu" => Activation::Relu,
        "sigmoid" => Activation::Sigmoid,
        "hardtanh" => Activation::HardTanh,
        "identity" => Activation::Identity,
        _ => {
            if let Some(rest) = name.strip_prefix("leaky-relu(") {
                let inner = rest.strip_suffix(')').ok_or_else(|| {
                    CliError::config(format!("malformed activation {name:?}"))
                })?;
                let slope: f64 = inner
                    .parse()
                    .map_err(|_| CliError::config(format!("bad leaky-relu slope {inner:?}")))?;
                Activation::LeakyRelu(slope)
            } else {
                return Err(CliError::config(format!(
                    "unknown activation {name:?} (expected relu, sigmoid, hardtanh, identity, leaky-relu(a))"
                )));
            }
        }
    })
}

pub fn activation_name(act: Activation) -> String {
    match act {
        Activation::Relu => "relu".into(),
        Activation::Sigmoid => "sigmoid".into(),
        Activation::HardTanh => "hardtanh".into(),
        Activation::Identity => "identity".into(),
        Activation::LeakyRelu(a) => format!("leaky-relu({a})"),
    }
}

/// Canonical, parseable description of a built model; hashed into
/// checkpoints and reconstructed from them.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpecText {
    pub unary_kind: UnaryKind,
    pub unary_input: usize,
    pub unary_hidden: usize,
    pub unary_activation: Activation,
    /// none | shared | shared-tied | per-edge | per-edge-tied
    pub pair_mode: String,
    /// none | linear | mlp
    pub top_kind: String,
    pub top_hidden: usize,
    pub top_activation: Activation,
    pub top_init: String,
    pub top_input_scale: f64,
}

impl ModelSpecText {
    pub fn from_config(cfg: &RunConfig, unary_input: usize, slot_count: usize) -> ModelSpecText {
        let unary_kind = match cfg.task.kind.as_str() {
            "multilabel" => UnaryKind::GlobalBinary,
            _ => UnaryKind::PerVariable,
        };
        let top_hidden = if cfg.model.top == "mlp" {
            if cfg.model.top_hidden == 0 {
                slot_count
            } else {
                cfg.model.top_hidden
            }
        } else {
            0
        };
        ModelSpecText {
            unary_kind,
            unary_input,
            unary_hidden: cfg.model.unary_hidden,
            unary_activation: parse_activation(&cfg.model.unary_activation).expect("validated"),
            pair_mode: cfg.model.pair.clone(),
            top_kind: cfg.model.top.clone(),
            top_hidden,
            top_activation: parse_activation(&cfg.model.top_activation).expect("validated"),
            top_init: cfg.model.top_init.clone(),
            top_input_scale: cfg.model.top_input_scale,
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "unary_kind={};unary_input={};unary_hidden={};unary_activation={};pair={};top={};top_hidden={};top_activation={};top_init={};top_input_scale={}",
            match self.unary_kind {
                UnaryKind::PerVariable => "per-variable",
                UnaryKind::GlobalBinary => "global-binary",
            },
            self.unary_input,
            self.unary_hidden,
            activation_name(self.unary_activation),
            self.pair_mode,
            self.top_kind,
            self.top_hidden,
            activation_name(self.top_activation),
            self.top_init,
            self.top_input_scale,
        )
    }

    pub fn parse(text: &str) -> CliResult<ModelSpecText> {
        let mut fields: BTreeMap<&str, &str> = BTreeMap::new();
        for part in text.split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("bad model spec field {part:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| -> CliResult<&str> {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| CliError::config(format!("model spec missing {k}")))
        };
        let parse_usize = |k: &str| -> CliResult<usize> {
            get(k)?
                .parse()
                .map_err(|_| CliError::config(format!("bad model spec value for {k}")))
        };
        Ok(ModelSpecText {
            unary_kind: match get("unary_kind")? {
                "per-variable" => UnaryKind::PerVariable,
                "global-binary" => UnaryKind::GlobalBinary,
                other => return Err(CliError::config(format!("bad unary kind {other:?}"))),
            },
            unary_input: parse_usize("unary_input")?,
            unary_hidden: parse_usize("unary_hidden")?,
            unary_activation: parse_activation(get("unary_activation")?)?,
            pair_mode: get("pair")?.to_string(),
            top_kind: get("top")?.to_string(),
            top_hidden: parse_usize("top_hidden")?,
            top_activation: parse_activation(get("top_activation")?)?,
            top_init: get("top_init")?.to_string(),
            top_input_scale: get("top_input_scale")?
                .parse()
                .map_err(|_| CliError::config("bad top_input_scale"))?,
        })
    }

    /// With the top swapped out, for baseline-ladder variants.
    pub fn with_top(&self, top_kind: &str) -> ModelSpecText {
        let mut spec = self.clone();
        spec.top_kind = top_kind.to_string();
        if top_kind != "mlp" {
            spec.top_hidden = 0;
        }
        spec
    }

    /// Build the structured model for a graph.
    pub fn build(&self, graph: RegionGraph) -> CliResult<StructuredModel> {
        let unary_out = match self.unary_kind {
            UnaryKind::PerVariable => graph.domain(0),
            UnaryKind::GlobalBinary => graph.num_vars(),
        };
        let unary_net = if self.unary_hidden == 0 {
            DiffNet::mlp(&[self.unary_input, unary_out], self.unary_activation)?
        } else {
            DiffNet::mlp(
                &[self.unary_input, self.unary_hidden, unary_out],
                self.unary_activation,
            )?
        };
        let pair_regions = graph.num_higher_regions();
        let make_table = |mode: SymmetryMode, r: usize| -> CliResult<PairTable> {
            let vars = &graph.region(r).vars;
            if vars.len() != 2 {
                return Err(CliError::config(
                    "pair tables require a graph with pair regions only",
                ));
            }
            Ok(PairTable::new(graph.domain(vars[0]), graph.domain(vars[1]), mode)?)
        };
        let first_pair_region = graph.num_vars();
        let pair = match self.pair_mode.as_str() {
            "none" => PairSpec::None,
            "shared" | "shared-tied" if pair_regions == 0 => PairSpec::None,
            "shared" => PairSpec::Shared(make_table(SymmetryMode::None, first_pair_region)?),
            "shared-tied" => {
                PairSpec::Shared(make_table(SymmetryMode::DiagOffdiag, first_pair_region)?)
            }
            "per-edge" | "per-edge-tied" if pair_regions == 0 => PairSpec::None,
            "per-edge" => PairSpec::PerEdge(
                (0..pair_regions)
                    .map(|e| make_table(SymmetryMode::None, first_pair_region + e))
                    .collect::<CliResult<_>>()?,
            ),
            "per-edge-tied" => PairSpec::PerEdge(
                (0..pair_regions)
                    .map(|e| make_table(SymmetryMode::DiagOffdiag, first_pair_region + e))
                    .collect::<CliResult<_>>()?,
            ),
            other => return Err(CliError::config(format!("unknown pair mode {other:?}"))),
        };
        let top = match self.top_kind.as_str() {
            "none" => TopSpec::None,
            "linear" => TopSpec::Linear,
            "mlp" => TopSpec::Mlp {
                hidden: if self.top_hidden == 0 { graph.total_slots() } else { self.top_hidden },
                activation: self.top_activation,
                init: match self.top_init.as_str() {
                    "identity-ones" => TopInit::IdentityOnes,
                    "glorot" => TopInit::Glorot,
                    other => return Err(CliError::config(format!("unknown top init {other:?}"))),
                },
                input_scale: self.top_input_scale,
            },
            other => return Err(CliError::config(format!("unknown top kind {other:?}"))),
        };
        Ok(StructuredModel::new(graph, self.unary_kind, unary_net, pair, top)?)
    }
}
