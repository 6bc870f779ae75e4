mod common;

use std::fs;
use std::path::Path;

use common::{rng, to_f32, uniform};
use edgespeech::arch::{build_network, ArchitectureSpec, LayerSpec, Network};
use edgespeech::data::*;
use edgespeech::frontend::{write_wav, MfccMatrix};
use edgespeech::nn::softmax_cross_entropy;
use edgespeech::Error;

const WORDS: [&str; 3] = ["yes", "no", "marvin"];

/// Split of every toy file, frozen from an independent FNV-1a evaluation.
const EXPECTED_SPLITS: [[u8; 10]; 3] = [
    [1, 0, 0, 2, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 2, 2, 0, 2, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
];

fn toy_name(word: usize, i: usize) -> String {
    format!("{word}{i:x}a{:04}_nohash_0.wav", i * 31 + word)
}

fn tone(seed: usize, len: usize) -> Vec<f32> {
    (0..len)
        .map(|t| 0.2 * ((t * (seed + 3)) as f32 * 0.01).sin())
        .collect()
}

fn toy_tree(root: &Path, with_noise: bool) {
    for (k, word) in WORDS.iter().enumerate() {
        let dir = root.join(word);
        fs::create_dir_all(&dir).unwrap();
        for i in 0..10 {
            write_wav(dir.join(toy_name(k, i)), &tone(k * 10 + i, 16_000), 16_000).unwrap();
        }
    }
    if with_noise {
        let dir = root.join(BACKGROUND_NOISE_DIR);
        fs::create_dir_all(&dir).unwrap();
        let mut r = rng(5);
        write_wav(dir.join("white.wav"), &to_f32(&uniform(&mut r, 16_000 * 12, -0.3, 0.3)), 16_000).unwrap();
    }
}

#[test]
fn split_rule_matches_frozen_assignment() {
    let split = [Split::Train, Split::Val, Split::Test];
    for (k, row) in EXPECTED_SPLITS.iter().enumerate() {
        for (i, &s) in row.iter().enumerate() {
            assert_eq!(split_for(&toy_name(k, i)), split[s as usize], "{}", toy_name(k, i));
        }
    }
}

#[test]
fn toy_tree_split_sizes() {
    let dir = tempfile::tempdir().unwrap();
    toy_tree(dir.path(), true);
    let s = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    // keywords 14/2/4, unknown 9/1/0 capped at ceil(keywords/8), silence = unknown kept
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (18, 4, 4));
    assert_eq!(s.train.class_counts()[UNKNOWN], 2);
    assert_eq!(s.train.class_counts()[SILENCE], 2);
    assert_eq!(s.val.class_counts()[SILENCE], 1);
    assert_eq!(s.test.class_counts()[UNKNOWN], 0);
    assert!(s.skipped.is_empty());
    for ex in s.train.examples.iter().chain(&s.val.examples) {
        assert_eq!((ex.features.frame_count(), ex.features.coeff_count()), (98, 40));
    }
}

#[test]
fn toy_tree_without_noise_has_no_silence() {
    let dir = tempfile::tempdir().unwrap();
    toy_tree(dir.path(), false);
    let s = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    assert_eq!((s.train.len(), s.val.len(), s.test.len()), (16, 3, 4));
}

#[test]
fn ingestion_is_deterministic_and_partitioned() {
    let dir = tempfile::tempdir().unwrap();
    toy_tree(dir.path(), true);
    let a = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    let b = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    assert_eq!(a, b);
    let sources = |d: &Dataset| d.examples.iter().map(|e| e.source.clone()).collect::<std::collections::BTreeSet<_>>();
    let (tr, va, te) = (sources(&a.train), sources(&a.val), sources(&a.test));
    assert!(tr.is_disjoint(&va) && tr.is_disjoint(&te) && va.is_disjoint(&te));
}

#[test]
fn partial_corpus_keeps_assignments() {
    let dir = tempfile::tempdir().unwrap();
    toy_tree(dir.path(), false);
    let full = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    fs::remove_dir_all(dir.path().join("no")).unwrap();
    let part = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    for split in Split::ALL {
        for ex in part.get(split).examples.iter().filter(|e| e.source.starts_with("yes/")) {
            assert!(full.get(split).examples.iter().any(|f| f.source == ex.source));
        }
    }
}

#[test]
fn ingestion_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        ingest_speech_commands(dir.path().join("absent"), &LabelMap::default()),
        Err(Error::MissingDirectory(_))
    ));
    fs::create_dir_all(dir.path().join("yes")).unwrap();
    fs::write(dir.path().join("yes/readme.txt"), "x").unwrap();
    assert!(matches!(
        ingest_speech_commands(dir.path(), &LabelMap::default()),
        Err(Error::NoValidFiles(_))
    ));
}

#[test]
fn malformed_files_are_skipped() {
    let dir = tempfile::tempdir().unwrap();
    toy_tree(dir.path(), false);
    fs::write(dir.path().join("yes").join(toy_name(0, 1)), b"RIFF????WAVEjunk").unwrap();
    let s = ingest_speech_commands(dir.path(), &LabelMap::default()).unwrap();
    assert_eq!(s.skipped.len(), 1);
    assert_eq!(s.train.len() + s.val.len() + s.test.len(), 16 + 3 + 4 - 1);
}

fn tiny_spec() -> ArchitectureSpec {
    ArchitectureSpec {
        name: "tiny".into(),
        input: [1, 8, 6],
        layers: vec![
            LayerSpec::conv(3, 3, 4),
            LayerSpec::conv(3, 3, 2),
            LayerSpec::conv(3, 3, 4),
            LayerSpec::global_pool(),
            LayerSpec::dense(12),
            LayerSpec::softmax(),
        ],
        reported_total: None,
    }
}

fn random_set(n: usize, seed: u64) -> Dataset {
    let mut r = rng(seed);
    let examples = (0..n)
        .map(|i| Example {
            features: MfccMatrix::new(to_f32(&uniform(&mut r, 48, -1.0, 1.0)), 8, 6).unwrap(),
            label: i % 12,
            source: format!("ex{i}"),
        })
        .collect();
    Dataset::new(Split::Train, examples)
}

fn trainable(net: &mut Network) -> Vec<Vec<f32>> {
    net.params_mut().into_iter().map(|p| p.to_vec()).collect()
}

#[test]
fn identical_seeds_identical_history() {
    let data = random_set(20, 1);
    let cfg = TrainConfig {
        epochs: 4,
        batch_size: 6,
        seed: 9,
        ..TrainConfig::default()
    };
    let run = || {
        let mut net = build_network(&tiny_spec(), 3).unwrap();
        let h = train(&mut net, &data, Some(&data), &cfg).unwrap();
        (h, net)
    };
    let (h1, n1) = run();
    let (h2, n2) = run();
    assert_eq!(h1, h2);
    assert_eq!(n1, n2);
    assert_eq!(h1.epochs.len(), 4);
    assert!(h1.epochs.iter().all(|e| e.val_accuracy.is_some()));
}

#[test]
fn zero_learning_rate_leaves_weights() {
    let data = random_set(10, 2);
    let mut net = build_network(&tiny_spec(), 4).unwrap();
    let before = trainable(&mut net);
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: 4,
        learning_rate: 0.0,
        ..TrainConfig::default()
    };
    train(&mut net, &data, None, &cfg).unwrap();
    assert_eq!(trainable(&mut net), before);
}

#[test]
fn single_step_is_plain_gradient_descent() {
    let data = random_set(8, 3);
    let spec = tiny_spec();
    let mut net = build_network(&spec, 5).unwrap();
    let w0 = trainable(&mut net);

    let mut probe = net.clone();
    let idx: Vec<usize> = (0..data.len()).collect();
    let (x, labels) = data.batch(&idx).unwrap();
    let (logits, cache) = probe.forward_train(&x).unwrap();
    let (_, grad, _) = softmax_cross_entropy(&logits, &labels).unwrap();
    let g = probe.backward(&cache, &grad).unwrap();

    let lr = 0.05;
    let cfg = TrainConfig {
        epochs: 1,
        batch_size: data.len(),
        learning_rate: lr,
        momentum: 0.0,
        weight_decay: 0.0,
        ..TrainConfig::default()
    };
    train(&mut net, &data, None, &cfg).unwrap();
    for ((after, before), grad) in trainable(&mut net).iter().zip(&w0).zip(&g.0) {
        for ((a, b), g) in after.iter().zip(before).zip(grad) {
            let want = f64::from(*b) - lr * f64::from(*g);
            assert!((f64::from(*a) - want).abs() < 1e-5, "{a} vs {want}");
        }
    }
}

#[test]
fn shape_mismatch_rejected() {
    let data = random_set(4, 4);
    let mut spec = tiny_spec();
    spec.input = [1, 9, 6];
    let mut net = build_network(&spec, 0).unwrap();
    assert!(matches!(
        train(&mut net, &data, None, &TrainConfig::default()),
        Err(Error::ShapeMismatch(_))
    ));
}

#[test]
fn divergence_reports_epoch() {
    let data = random_set(12, 6);
    let mut net = build_network(&tiny_spec(), 1).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 4,
        learning_rate: 1e30,
        lr_decay: 1.0,
        ..TrainConfig::default()
    };
    assert!(matches!(train(&mut net, &data, None, &cfg), Err(Error::NonFiniteLoss { .. })));
}

#[test]
fn evaluation_rules() {
    let empty = Dataset::new(Split::Val, vec![]);
    let mut net = build_network(&tiny_spec(), 0).unwrap();
    assert!(matches!(evaluate(&net, &empty), Err(Error::EmptyDataset)));

    // zero dense weights give uniform probabilities; the tie goes to class 0
    if let Some(w) = net.params_mut().into_iter().last() {
        w.fill(0.0);
    }
    let mut data = random_set(8, 7);
    for (i, ex) in data.examples.iter_mut().enumerate() {
        ex.label = if i < 2 { 0 } else { 5 };
    }
    assert_eq!(evaluate(&net, &data).unwrap(), 0.25);
    assert!(!indicator(&net, &data, DEFAULT_THRESHOLD).unwrap());
    assert!(indicator(&net, &data, 0.25).unwrap());
}

#[test]
fn folded_evaluation_and_prediction_agree() {
    let data = random_set(24, 8);
    let mut net = build_network(&tiny_spec(), 2).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        batch_size: 8,
        ..TrainConfig::default()
    };
    train(&mut net, &data, None, &cfg).unwrap();
    let folded = net.fold().unwrap();
    assert_eq!(evaluate(&net, &data).unwrap(), evaluate(&folded, &data).unwrap());
    let labels = LabelMap::default();
    for ex in &data.examples {
        let p = predict(&net, &labels, &ex.features).unwrap();
        let q = predict(&folded, &labels, &ex.features).unwrap();
        assert_eq!(p.label, q.label);
        assert_eq!(p.probabilities.len(), 12);
        assert!((p.probabilities.iter().map(|&v| f64::from(v)).sum::<f64>() - 1.0).abs() < 1e-6);
        assert_eq!(labels.name(edgespeech::nn::argmax(&p.probabilities)), Some(p.label.as_str()));
    }
}

#[test]
fn checkpoint_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.esnw");
    let net = build_network(&tiny_spec(), 6).unwrap();
    let meta = CheckpointMeta {
        spec: tiny_spec(),
        epoch: 3,
        val_accuracy: Some(0.5),
        config: TrainConfig::default(),
    };
    save_checkpoint(&path, &net, &meta).unwrap();
    assert!(sidecar_path(&path).exists());
    let (loaded, m) = load_checkpoint(&path).unwrap();
    assert_eq!(loaded, net);
    assert_eq!(m, meta);
}
