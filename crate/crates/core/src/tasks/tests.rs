use super::*;

#[test]
fn zero_noise_zero_transform_reproduces_glyph_bitmaps() {
    let spec = WordTaskSpec {
        vocabulary: vec!["close".into()],
        train: 3,
        val: 1,
        test: 1,
        seed: 5,
        noise: NoiseParams::none(),
        compact_alphabet: true,
    };
    let data = gen_words(&spec).unwrap();
    let ex = &data.train.examples[0];
    let feats = match &ex.input {
        ExampleInput::PerVariable(f) => f,
        _ => panic!("wrong kind"),
    };
    for (pos, ch) in "close".chars().enumerate() {
        assert_eq!(feats[pos], glyphs::base_image(ch).unwrap(), "letter {ch}");
    }
}

#[test]
fn identical_seeds_give_bit_identical_datasets() {
    let spec = WordTaskSpec::reduced(3);
    let a = gen_words(&spec).unwrap();
    let b = gen_words(&spec).unwrap();
    for (x, y) in a.train.examples.iter().zip(&b.train.examples) {
        assert_eq!(x.truth, y.truth);
        match (&x.input, &y.input) {
            (ExampleInput::PerVariable(fx), ExampleInput::PerVariable(fy)) => {
                assert_eq!(fx, fy)
            }
            _ => panic!("wrong kind"),
        }
    }
    // a different seed changes at least the word sequence
    let c = gen_words(&WordTaskSpec::reduced(4)).unwrap();
    let same = a
        .train
        .examples
        .iter()
        .zip(&c.train.examples)
        .all(|(x, y)| x.truth == y.truth);
    assert!(!same);
}

#[test]
fn full_spec_split_sizes_and_domain() {
    let spec = WordTaskSpec::full(0);
    assert_eq!(spec.train, 1000);
    assert_eq!(spec.val, 200);
    assert_eq!(spec.test, 200);
    assert_eq!(spec.alphabet().len(), 26);
    // Generating all 1400 examples is cheap enough to verify counts directly.
    let data = gen_words(&spec).unwrap();
    assert_eq!(data.train.len(), 1000);
    assert_eq!(data.val.len(), 200);
    assert_eq!(data.test.len(), 200);
    assert_eq!(data.train.domain, 26);
}

#[test]
fn reduced_spec_uses_compact_alphabet() {
    let spec = WordTaskSpec::reduced(0);
    let alphabet = spec.alphabet();
    assert_eq!(alphabet, vec!['c', 'd', 'e', 'h', 'l', 'o', 'r', 's', 't', 'w']);
    let data = gen_words(&spec).unwrap();
    assert_eq!(data.train.domain, 10);
    assert_eq!(data.train.len(), 300);
}

#[test]
fn word_images_stay_in_unit_interval() {
    let data = gen_words(&WordTaskSpec::reduced(1)).unwrap();
    for ex in data.train.examples.iter().take(20) {
        if let ExampleInput::PerVariable(feats) = &ex.input {
            for f in feats {
                assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
            }
        }
    }
}

#[test]
fn unknown_character_is_rejected() {
    let spec = WordTaskSpec {
        vocabulary: vec!["ab0de".into()],
        ..WordTaskSpec::reduced(0)
    };
    assert!(gen_words(&spec).is_err());
}

#[test]
fn multilabel_generation_is_deterministic_and_shaped() {
    let spec = MultilabelTaskSpec { seed: 2, ..MultilabelTaskSpec::default() };
    let a = gen_multilabel(&spec).unwrap();
    let b = gen_multilabel(&spec).unwrap();
    assert_eq!(a.train.len(), spec.train);
    assert_eq!(a.train.num_vars, spec.labels);
    assert_eq!(a.train.domain, 2);
    for (x, y) in a.train.examples.iter().zip(&b.train.examples) {
        assert_eq!(x.truth, y.truth);
        match (&x.input, &y.input) {
            (ExampleInput::Global(fx), ExampleInput::Global(fy)) => assert_eq!(fx, fy),
            _ => panic!("wrong kind"),
        }
    }
}

#[test]
fn select_pairs_full_budget_returns_all_pairs() {
    let spec = MultilabelTaskSpec { labels: 5, pair_budget: 10, ..MultilabelTaskSpec::default() };
    let data = gen_multilabel(&spec).unwrap();
    let pairs = select_pairs(&data.train, 10).unwrap();
    assert_eq!(pairs.len(), 10);
    let mut sorted = pairs.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 10);
    assert!(select_pairs(&data.train, 11).is_err());
}

#[test]
fn select_pairs_counts_match_direct_enumeration() {
    // Hand-checkable fixture of 20 examples over 3 labels.
    let mut examples = Vec::new();
    let patterns = [
        (vec![1, 1, 0], 8), // pair (0,1) x 8
        (vec![1, 0, 1], 5), // pair (0,2) x 5
        (vec![0, 1, 1], 4), // pair (1,2) x 4
        (vec![0, 0, 0], 3),
    ];
    for (labels, copies) in patterns {
        for _ in 0..copies {
            examples.push(Example {
                input: ExampleInput::Global(vec![0.0; 2]),
                truth: Assignment::new(labels.clone()),
            });
        }
    }
    let ds = Dataset {
        kind: DatasetKind::Global,
        num_vars: 3,
        domain: 2,
        feature_dim: 2,
        examples,
    };
    assert_eq!(
        select_pairs(&ds, 3).unwrap(),
        vec![vec![0, 1], vec![0, 2], vec![1, 2]]
    );
    assert_eq!(select_pairs(&ds, 1).unwrap(), vec![vec![0, 1]]);
}

#[test]
fn independent_labels_select_high_marginal_pairs() {
    // With couplings off, co-occurrence counts track the product of label
    // marginals; report the overlap between the two rankings (smoke check,
    // sampling noise makes exact agreement too strict to assert).
    let spec = MultilabelTaskSpec {
        labels: 6,
        coupling_scale: 0.0,
        bias_scale: 1.5,
        pair_budget: 5,
        train: 2000,
        ..MultilabelTaskSpec::default()
    };
    let data = gen_multilabel(&spec).unwrap();
    let selected = select_pairs(&data.train, 5).unwrap();
    let n = data.train.len() as f64;
    let marginals: Vec<f64> = (0..6)
        .map(|l| data.train.examples.iter().filter(|e| e.truth.labels[l] == 1).count() as f64 / n)
        .collect();
    let mut by_product: Vec<(f64, Vec<usize>)> = Vec::new();
    for a in 0..6 {
        for b in (a + 1)..6 {
            by_product.push((marginals[a] * marginals[b], vec![a, b]));
        }
    }
    by_product.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap().then(x.1.cmp(&y.1)));
    let top_product: Vec<Vec<usize>> = by_product.into_iter().take(5).map(|(_, p)| p).collect();
    let overlap = selected.iter().filter(|p| top_product.contains(p)).count();
    println!("pair selection vs marginal products: {overlap}/5 overlap");
}

#[test]
fn select_pair_ties_break_lexicographically() {
    let examples = vec![Example {
        input: ExampleInput::Global(vec![0.0]),
        truth: Assignment::new(vec![1, 1, 1]),
    }];
    let ds = Dataset {
        kind: DatasetKind::Global,
        num_vars: 3,
        domain: 2,
        feature_dim: 1,
        examples,
    };
    // all three pairs co-occur once; lexicographic order decides
    assert_eq!(select_pairs(&ds, 2).unwrap(), vec![vec![0, 1], vec![0, 2]]);
}

#[test]
fn perfect_predictions_score_perfectly() {
    let truths: Vec<Assignment> =
        (0..4).map(|i| Assignment::new(vec![i % 3, (i + 1) % 3])).collect();
    let report = compute_metrics(3, &truths, &truths).unwrap();
    assert_eq!(report.word_accuracy, 1.0);
    assert_eq!(report.char_accuracy, 1.0);
    assert_eq!(report.hamming_loss, 0.0);
    assert_eq!(report.macro_f1, 1.0);
}

#[test]
fn one_wrong_letter_per_word_gives_partial_credit() {
    let truths: Vec<Assignment> = (0..4).map(|_| Assignment::new(vec![0; 5])).collect();
    let preds: Vec<Assignment> = (0..4)
        .map(|i| {
            let mut labels = vec![0; 5];
            labels[i] = 1;
            Assignment::new(labels)
        })
        .collect();
    let report = compute_metrics(2, &preds, &truths).unwrap();
    assert_eq!(report.word_accuracy, 0.0);
    assert!((report.char_accuracy - 0.8).abs() < 1e-12);
    assert!((report.hamming_loss - 1.0).abs() < 1e-12);
}

#[test]
fn macro_f1_matches_hand_computation_on_three_label_fixture() {
    // Confusion fixture over classes {0,1,2}, single variable per example:
    //   truth 0 predicted 0 x 3, truth 0 predicted 1 x 1,
    //   truth 1 predicted 1 x 2, truth 1 predicted 2 x 2,
    //   truth 2 predicted 2 x 1, truth 2 predicted 0 x 1.
    // Class 0: tp=3 fp=1 fn=1 -> f1 = 6/8; class 1: tp=2 fp=1 fn=2 -> 4/7;
    // class 2: tp=1 fp=2 fn=1 -> 2/5. macro = (0.75 + 4/7 + 0.4) / 3.
    let pairs = [
        (0, 0),
        (0, 0),
        (0, 0),
        (0, 1),
        (1, 1),
        (1, 1),
        (1, 2),
        (1, 2),
        (2, 2),
        (2, 0),
    ];
    let truths: Vec<Assignment> = pairs.iter().map(|&(t, _)| Assignment::new(vec![t])).collect();
    let preds: Vec<Assignment> = pairs.iter().map(|&(_, p)| Assignment::new(vec![p])).collect();
    let report = compute_metrics(3, &preds, &truths).unwrap();
    let expected = (0.75 + 4.0 / 7.0 + 0.4) / 3.0;
    assert!((report.macro_f1 - expected).abs() < 1e-12);
}

#[test]
fn metrics_are_permutation_invariant() {
    let truths: Vec<Assignment> = (0..6)
        .map(|i| Assignment::new(vec![i % 2, (i / 2) % 2]))
        .collect();
    let preds: Vec<Assignment> = (0..6).map(|i| Assignment::new(vec![i % 2, 0])).collect();
    let a = compute_metrics(2, &preds, &truths).unwrap();
    let perm = [5, 3, 1, 0, 2, 4];
    let truths_p: Vec<Assignment> = perm.iter().map(|&i| truths[i].clone()).collect();
    let preds_p: Vec<Assignment> = perm.iter().map(|&i| preds[i].clone()).collect();
    let b = compute_metrics(2, &preds_p, &truths_p).unwrap();
    assert_eq!(a.char_accuracy, b.char_accuracy);
    assert_eq!(a.word_accuracy, b.word_accuracy);
    assert_eq!(a.hamming_loss, b.hamming_loss);
    assert_eq!(a.macro_f1, b.macro_f1);
    // char accuracy always dominates word accuracy
    assert!(a.char_accuracy >= a.word_accuracy);
}

#[test]
fn evaluate_rejects_exact_dp_on_loopy_graphs() {
    use crate::diffnet::{Activation, DiffNet};
    use crate::learn::{PairSpec, TopSpec, UnaryKind};

    let spec = MultilabelTaskSpec { labels: 4, pair_budget: 6, ..Default::default() };
    let data = gen_multilabel(&spec).unwrap();
    let pairs = select_pairs(&data.train, spec.pair_budget).unwrap();
    let graph = crate::regiongraph::RegionGraph::new(vec![2; 4], pairs).unwrap();
    let unary = DiffNet::mlp(&[spec.feature_dim, 8, 4], Activation::Relu).unwrap();
    let model = StructuredModel::new(
        graph,
        UnaryKind::GlobalBinary,
        unary,
        PairSpec::None,
        TopSpec::None,
    )
    .unwrap();
    let params = model.init_params(0).unwrap();
    let err = evaluate(
        &model,
        &params,
        &data.test,
        InferenceMode::ExactDp,
        &SaddleConfig::default(),
        &SpenConfig::default(),
    );
    assert!(err.is_err());
    // message passing handles the loopy graph
    let ok = evaluate(
        &model,
        &params,
        &data.test,
        InferenceMode::MessagePassing,
        &SaddleConfig::default(),
        &SpenConfig::default(),
    );
    assert!(ok.is_ok());
}
