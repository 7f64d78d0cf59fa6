//! Synthetic benchmark tasks, evaluation metrics, and dataset files.

mod dataset;
pub mod glyphs;

pub use dataset::{Dataset, DatasetKind};

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::learn::{
    predict, Example, ExampleInput, InferenceMode, ModelParams, StructuredModel,
};
use crate::mapsolver::SpenConfig;
use crate::regiongraph::Assignment;
use crate::rng;
use crate::saddle::SaddleConfig;

/// 50 common five-letter words for the full-scale task.
pub const FULL_VOCABULARY: [&str; 50] = [
    "about", "other", "which", "their", "there", "first", "would", "these", "close", "world",
    "water", "after", "where", "right", "think", "three", "years", "place", "sound", "great",
    "again", "still", "every", "small", "found", "those", "never", "under", "might", "while",
    "house", "below", "asked", "going", "large", "until", "along", "shall", "being", "often",
    "earth", "began", "since", "study", "night", "light", "above", "paper", "parts", "young",
];

/// 10 words over a 10-letter alphabet for the reduced (CI-scale) task.
pub const REDUCED_VOCABULARY: [&str; 10] = [
    "close", "other", "world", "store", "horse", "those", "chore", "whole", "older", "shred",
];

/// Per-letter image perturbations and background statistics.
#[derive(Debug, Clone)]
pub struct NoiseParams {
    /// Rotation range, degrees (plus or minus).
    pub rotation_deg: f64,
    /// Shift range, pixels (plus or minus).
    pub shift_px: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    /// Per-image background contrast is uniform in this range; background
    /// pixels are uniform noise times the contrast.
    pub bg_lo: f64,
    pub bg_hi: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            rotation_deg: 15.0,
            shift_px: 3.0,
            scale_min: 0.7,
            scale_max: 1.1,
            bg_lo: 0.3,
            bg_hi: 1.0,
        }
    }
}

impl NoiseParams {
    /// No perturbations, black background: renders the raw glyph bitmaps.
    pub fn none() -> Self {
        NoiseParams {
            rotation_deg: 0.0,
            shift_px: 0.0,
            scale_min: 1.0,
            scale_max: 1.0,
            bg_lo: 0.0,
            bg_hi: 0.0,
        }
    }
}

/// The synthetic word recognition task.
#[derive(Debug, Clone)]
pub struct WordTaskSpec {
    pub vocabulary: Vec<String>,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    pub noise: NoiseParams,
    /// Restrict the label domain to the letters the vocabulary uses.
    pub compact_alphabet: bool,
}

impl WordTaskSpec {
    pub fn full(seed: u64) -> Self {
        WordTaskSpec {
            vocabulary: FULL_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            train: 1000,
            val: 200,
            test: 200,
            seed,
            noise: NoiseParams::default(),
            compact_alphabet: false,
        }
    }

    pub fn reduced(seed: u64) -> Self {
        WordTaskSpec {
            vocabulary: REDUCED_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            train: 300,
            val: 100,
            test: 100,
            seed,
            noise: NoiseParams::default(),
            compact_alphabet: true,
        }
    }

    /// Label alphabet: the distinct vocabulary letters (compact) or a-z.
    pub fn alphabet(&self) -> Vec<char> {
        if self.compact_alphabet {
            let mut letters: Vec<char> =
                self.vocabulary.iter().flat_map(|w| w.chars()).collect();
            letters.sort_unstable();
            letters.dedup();
            letters
        } else {
            ('a'..='z').collect()
        }
    }

    pub fn word_len(&self) -> usize {
        self.vocabulary.first().map_or(0, |w| w.chars().count())
    }

    fn validate(&self) -> Result<()> {
        if self.vocabulary.is_empty() {
            return Err(Error::structure("vocabulary is empty"));
        }
        let len = self.word_len();
        for w in &self.vocabulary {
            if w.chars().count() != len {
                return Err(Error::structure(format!(
                    "word {w:?} has length {}, expected {len}",
                    w.chars().count()
                )));
            }
            for ch in w.chars() {
                glyphs::glyph(ch)?;
            }
        }
        if self.noise.scale_min > self.noise.scale_max || self.noise.bg_lo > self.noise.bg_hi {
            return Err(Error::structure("noise ranges are inverted"));
        }
        Ok(())
    }
}

/// Train/val/test splits plus the label alphabet.
#[derive(Debug, Clone)]
pub struct WordData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    pub alphabet: Vec<char>,
}

/// Render one letter: transform the glyph bitmap and composite it over a
/// noisy background.
fn render_letter(ch: char, noise: &NoiseParams, r: &mut impl Rng) -> Result<Vec<f64>> {
    let base = glyphs::base_image(ch)?;
    let side = glyphs::IMAGE_SIDE;
    let angle = r.gen_range(-noise.rotation_deg..=noise.rotation_deg).to_radians();
    let scale = r.gen_range(noise.scale_min..=noise.scale_max);
    let dx = r.gen_range(-noise.shift_px..=noise.shift_px);
    let dy = r.gen_range(-noise.shift_px..=noise.shift_px);
    let contrast = r.gen_range(noise.bg_lo..=noise.bg_hi);
    let background: Vec<f64> = (0..side * side).map(|_| r.gen::<f64>() * contrast).collect();

    let center = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let mut out = vec![0.0; side * side];
    for row in 0..side {
        for col in 0..side {
            // Invert shift, scale, rotation to find the glyph source pixel.
            let u = col as f64 - center - dx;
            let v = row as f64 - center - dy;
            let (u, v) = (u / scale, v / scale);
            let su = cos * u + sin * v;
            let sv = -sin * u + cos * v;
            let sc = (su + center).round();
            let sr = (sv + center).round();
            let glyph_on = sc >= 0.0
                && sr >= 0.0
                && (sc as usize) < side
                && (sr as usize) < side
                && base[sr as usize * side + sc as usize] > 0.5;
            out[row * side + col] =
                if glyph_on { 1.0 } else { background[row * side + col] };
        }
    }
    Ok(out)
}

fn gen_word_split(
    spec: &WordTaskSpec,
    alphabet: &[char],
    namespace: u64,
    count: usize,
) -> Result<Dataset> {
    let k = spec.word_len();
    let label_of = |ch: char| -> usize {
        alphabet.iter().position(|&c| c == ch).expect("validated vocabulary")
    };
    let mut examples = Vec::with_capacity(count);
    for idx in 0..count {
        let mut r = rng::stream(spec.seed, namespace, idx as u64);
        let word = &spec.vocabulary[r.gen_range(0..spec.vocabulary.len())];
        let mut feats = Vec::with_capacity(k);
        let mut labels = Vec::with_capacity(k);
        for ch in word.chars() {
            feats.push(render_letter(ch, &spec.noise, &mut r)?);
            labels.push(label_of(ch));
        }
        examples.push(Example {
            input: ExampleInput::PerVariable(feats),
            truth: Assignment::new(labels),
        });
    }
    Ok(Dataset {
        kind: DatasetKind::PerVariable,
        num_vars: k,
        domain: alphabet.len(),
        feature_dim: glyphs::IMAGE_SIDE * glyphs::IMAGE_SIDE,
        examples,
    })
}

/// Generate the word recognition splits. Pure function of the spec.
pub fn gen_words(spec: &WordTaskSpec) -> Result<WordData> {
    spec.validate()?;
    let alphabet = spec.alphabet();
    Ok(WordData {
        train: gen_word_split(spec, &alphabet, rng::ns::DATA_TRAIN, spec.train)?,
        val: gen_word_split(spec, &alphabet, rng::ns::DATA_VAL, spec.val)?,
        test: gen_word_split(spec, &alphabet, rng::ns::DATA_TEST, spec.test)?,
        alphabet,
    })
}

/// Synthetic multilabel classification task.
#[derive(Debug, Clone)]
pub struct MultilabelTaskSpec {
    /// Number of binary labels (at most 16; label subsets are sampled by
    /// exact enumeration).
    pub labels: usize,
    pub feature_dim: usize,
    /// Pair regions kept after co-occurrence selection.
    pub pair_budget: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub seed: u64,
    /// Scale of the ground-truth unary fields.
    pub bias_scale: f64,
    /// Scale of the ground-truth pairwise couplings.
    pub coupling_scale: f64,
    /// Feature noise standard deviation.
    pub noise_sigma: f64,
}

impl Default for MultilabelTaskSpec {
    fn default() -> Self {
        MultilabelTaskSpec {
            labels: 8,
            feature_dim: 16,
            pair_budget: 12,
            train: 300,
            val: 100,
            test: 100,
            seed: 0,
            bias_scale: 0.5,
            coupling_scale: 1.0,
            noise_sigma: 0.4,
        }
    }
}

/// The label-subset generator: a fixed random pairwise model over all label
/// pairs, sampled exactly by enumeration.
struct LabelModel {
    bias: Vec<f64>,
    /// Upper-triangular couplings, indexed by (l, m), l < m.
    coupling: Vec<((usize, usize), f64)>,
    prototypes: Vec<Vec<f64>>,
}

impl LabelModel {
    fn build(spec: &MultilabelTaskSpec) -> LabelModel {
        let mut r = rng::stream(spec.seed, rng::ns::TASK_MODEL, 0);
        let bias =
            (0..spec.labels).map(|_| r.gen_range(-spec.bias_scale..=spec.bias_scale)).collect();
        let mut coupling = Vec::new();
        for l in 0..spec.labels {
            for m in (l + 1)..spec.labels {
                coupling
                    .push(((l, m), r.gen_range(-spec.coupling_scale..=spec.coupling_scale)));
            }
        }
        let prototypes = (0..spec.labels)
            .map(|_| (0..spec.feature_dim).map(|_| r.gen_range(-1.0..1.0)).collect())
            .collect();
        LabelModel { bias, coupling, prototypes }
    }

    /// Unnormalized log-weight of a label subset.
    fn energy(&self, y: &[usize]) -> f64 {
        let mut e = 0.0;
        for (l, &v) in y.iter().enumerate() {
            if v == 1 {
                e += self.bias[l];
            }
        }
        for &((l, m), j) in &self.coupling {
            if y[l] == 1 && y[m] == 1 {
                e += j;
            }
        }
        e
    }
}

fn standard_normal(r: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = r.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn gen_multilabel_split(
    spec: &MultilabelTaskSpec,
    model: &LabelModel,
    weights: &[f64],
    namespace: u64,
    count: usize,
) -> Dataset {
    let total: f64 = weights.iter().sum();
    let mut examples = Vec::with_capacity(count);
    for idx in 0..count {
        let mut r = rng::stream(spec.seed, namespace, idx as u64);
        // Exact categorical draw over all label subsets.
        let mut u = r.gen_range(0.0..1.0) * total;
        let mut config = weights.len() - 1;
        for (c, &w) in weights.iter().enumerate() {
            if u < w {
                config = c;
                break;
            }
            u -= w;
        }
        let labels: Vec<usize> =
            (0..spec.labels).map(|l| (config >> (spec.labels - 1 - l)) & 1).collect();
        let mut feat = vec![0.0; spec.feature_dim];
        for (l, &v) in labels.iter().enumerate() {
            if v == 1 {
                crate::numeric::axpy(1.0, &model.prototypes[l], &mut feat);
            }
        }
        for v in feat.iter_mut() {
            *v += spec.noise_sigma * standard_normal(&mut r);
        }
        examples.push(Example {
            input: ExampleInput::Global(feat),
            truth: Assignment::new(labels),
        });
    }
    Dataset {
        kind: DatasetKind::Global,
        num_vars: spec.labels,
        domain: 2,
        feature_dim: spec.feature_dim,
        examples,
    }
}

/// Multilabel splits.
#[derive(Debug, Clone)]
pub struct MultilabelData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Generate the multilabel splits. Pure function of the spec.
pub fn gen_multilabel(spec: &MultilabelTaskSpec) -> Result<MultilabelData> {
    if spec.labels == 0 || spec.labels > 16 {
        return Err(Error::structure("label count must lie in 1..=16"));
    }
    let max_pairs = spec.labels * (spec.labels - 1) / 2;
    if spec.pair_budget > max_pairs {
        return Err(Error::structure(format!(
            "pair budget {} exceeds {} possible pairs",
            spec.pair_budget, max_pairs
        )));
    }
    let model = LabelModel::build(spec);
    let configs = 1usize << spec.labels;
    let weights: Vec<f64> = (0..configs)
        .map(|c| {
            let y: Vec<usize> =
                (0..spec.labels).map(|l| (c >> (spec.labels - 1 - l)) & 1).collect();
            model.energy(&y).exp()
        })
        .collect();
    Ok(MultilabelData {
        train: gen_multilabel_split(spec, &model, &weights, rng::ns::DATA_TRAIN, spec.train),
        val: gen_multilabel_split(spec, &model, &weights, rng::ns::DATA_VAL, spec.val),
        test: gen_multilabel_split(spec, &model, &weights, rng::ns::DATA_TEST, spec.test),
    })
}

/// Pairs of labels appearing together most often in the dataset, ties broken
/// lexicographically; returns `budget` pairs as ascending index tuples.
pub fn select_pairs(dataset: &Dataset, budget: usize) -> Result<Vec<Vec<usize>>> {
    if dataset.domain != 2 {
        return Err(Error::structure("pair selection expects binary labels"));
    }
    let l = dataset.num_vars;
    let mut counts: Vec<((usize, usize), usize)> = Vec::new();
    for a in 0..l {
        for b in (a + 1)..l {
            let c = dataset
                .examples
                .iter()
                .filter(|ex| ex.truth.labels[a] == 1 && ex.truth.labels[b] == 1)
                .count();
            counts.push(((a, b), c));
        }
    }
    if budget > counts.len() {
        return Err(Error::structure(format!(
            "pair budget {budget} exceeds {} possible pairs",
            counts.len()
        )));
    }
    counts.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(&y.0)));
    Ok(counts.into_iter().take(budget).map(|((a, b), _)| vec![a, b]).collect())
}

/// Aggregate task metrics with their underlying counts.
#[derive(Debug, Clone)]
pub struct MetricReport {
    /// Exact sequence matches over examples.
    pub word_accuracy: f64,
    /// Per-variable matches over all variables.
    pub char_accuracy: f64,
    /// Mean per-example count of mismatched variables.
    pub hamming_loss: f64,
    /// Macro-averaged F1 over label classes (pooled across variables).
    pub macro_f1: f64,
    pub examples: usize,
    pub correct_examples: usize,
    pub variables: usize,
    pub correct_variables: usize,
}

/// Compute metrics from aligned prediction/truth lists.
pub fn compute_metrics(
    domain: usize,
    predictions: &[Assignment],
    truths: &[Assignment],
) -> Result<MetricReport> {
    if predictions.len() != truths.len() || predictions.is_empty() {
        return Err(Error::structure("prediction and truth lists must align and be nonempty"));
    }
    let mut correct_examples = 0usize;
    let mut correct_variables = 0usize;
    let mut variables = 0usize;
    let mut mismatches = 0usize;
    let mut tp = vec![0usize; domain];
    let mut fp = vec![0usize; domain];
    let mut fn_ = vec![0usize; domain];
    for (pred, truth) in predictions.iter().zip(truths) {
        if pred.labels.len() != truth.labels.len() {
            return Err(Error::structure("prediction arity does not match truth"));
        }
        let mut wrong = 0usize;
        for (&p, &t) in pred.labels.iter().zip(&truth.labels) {
            if p >= domain || t >= domain {
                return Err(Error::structure("label out of domain range"));
            }
            variables += 1;
            if p == t {
                correct_variables += 1;
                tp[p] += 1;
            } else {
                wrong += 1;
                fp[p] += 1;
                fn_[t] += 1;
            }
        }
        mismatches += wrong;
        if wrong == 0 {
            correct_examples += 1;
        }
    }
    // Macro F1 over classes that occur in the truth or the predictions.
    let mut f1_sum = 0.0;
    let mut f1_classes = 0usize;
    for c in 0..domain {
        let support = tp[c] + fp[c] + fn_[c];
        if support == 0 {
            continue;
        }
        f1_classes += 1;
        f1_sum += 2.0 * tp[c] as f64 / (2.0 * tp[c] as f64 + fp[c] as f64 + fn_[c] as f64);
    }
    Ok(MetricReport {
        word_accuracy: correct_examples as f64 / predictions.len() as f64,
        char_accuracy: correct_variables as f64 / variables as f64,
        hamming_loss: mismatches as f64 / predictions.len() as f64,
        macro_f1: if f1_classes == 0 { 0.0 } else { f1_sum / f1_classes as f64 },
        examples: predictions.len(),
        correct_examples,
        variables,
        correct_variables,
    })
}

/// Decode every example under the chosen inference mode and aggregate
/// metrics. Examples run in parallel; outputs are order-independent.
pub fn evaluate(
    model: &StructuredModel,
    params: &ModelParams,
    dataset: &Dataset,
    mode: InferenceMode,
    saddle_cfg: &SaddleConfig,
    spen_cfg: &SpenConfig,
) -> Result<MetricReport> {
    if dataset.is_empty() {
        return Err(Error::structure("dataset is empty"));
    }
    let predictions: Result<Vec<Assignment>> = dataset
        .examples
        .par_iter()
        .map(|ex| predict(model, params, &ex.input, mode, saddle_cfg, spen_cfg))
        .collect();
    let truths: Vec<Assignment> = dataset.examples.iter().map(|ex| ex.truth.clone()).collect();
    compute_metrics(dataset.domain, &predictions?, &truths)
}

#[cfg(test)]
mod tests;
