mod common;

use stegodetect::corpus::{prepare, PrepareOptions, Split, Task};
use stegodetect::evaluation::{
    evaluate_binary, evaluate_multiclass, predict_argmax, predict_binary, write_features, ConfusionMatrix, Metrics,
};
use stegodetect::network::{ModelConfig, ModelParams};
use stegodetect::numerics::Rng;
use stegodetect::stegogen::synthesize_dataset;

fn parse_confusion(text: &str) -> ConfusionMatrix {
    let mut lines = text.lines();
    let classes = lines.next().unwrap().split('\t').count() - 1;
    let mut cm = ConfusionMatrix::new(classes);
    for line in lines {
        let fields: Vec<usize> = line.split('\t').map(|f| f.parse().unwrap()).collect();
        for (p, &n) in fields[1..].iter().enumerate() {
            for _ in 0..n {
                cm.add(fields[0], p);
            }
        }
    }
    cm
}

#[test]
fn uniform_guessing_scores_one_sixth() {
    let mut rng = Rng::new(6);
    let n = 60_000;
    let truth: Vec<usize> = (0..n).map(|i| i % 6).collect();
    let guess: Vec<usize> = (0..n).map(|_| rng.below(6)).collect();
    let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(6, &truth, &guess), None);
    // Standard error of each per-class F1 here is about 0.004.
    assert!((m.macro_f1 - 1.0 / 6.0).abs() < 0.01, "{}", m.macro_f1);
    assert!((m.accuracy - 1.0 / 6.0).abs() < 0.01, "{}", m.accuracy);
}

#[test]
fn metrics_survive_a_trip_through_the_printed_matrix() {
    let mut rng = Rng::new(2);
    for classes in [2, 6] {
        let truth: Vec<usize> = (0..500).map(|_| rng.below(classes)).collect();
        let pred: Vec<usize> = truth
            .iter()
            .map(|&t| if rng.bernoulli(0.6) { t } else { rng.below(classes) })
            .collect();
        let positive = (classes == 2).then_some(1);
        let m = Metrics::from_confusion(ConfusionMatrix::from_pairs(classes, &truth, &pred), positive);
        assert_eq!(m.samples(), 500);
        let again = Metrics::from_confusion(parse_confusion(&m.confusion.to_string()), positive);
        assert_eq!(m, again);
    }
}

#[test]
fn half_threshold_agrees_with_argmax_and_features_are_stable() {
    let synth = synthesize_dataset(common::speech_lm(), 150, &[0, 4], 5).unwrap();
    let (vocab, corpus) = prepare(
        &synth.to_text_corpus(),
        Task::Binary { bpw: 4 },
        &PrepareOptions::default(),
    )
    .unwrap();
    let mut cfg = ModelConfig::ts_birnn(vocab.len(), 2);
    cfg.embedding_dim = 12;
    cfg.hidden_units = 6;
    cfg.fused_dim = 5;
    let model: ModelParams<f32> = ModelParams::init(&cfg, &mut Rng::new(4)).unwrap();

    let all: Vec<usize> = (0..corpus.len()).collect();
    let rows: Vec<&[u32]> = corpus.samples.iter().map(|s| s.ids.as_slice()).collect();
    let probs = model.predict_proba(&rows).unwrap();
    let ties = (0..probs.rows())
        .filter(|&r| probs.get(r, 0) == probs.get(r, 1))
        .count();
    assert_eq!(ties, 0);
    assert_eq!(predict_binary(&probs, 0.5), predict_argmax(&probs));

    let binary = evaluate_binary(&model, &corpus, &all, 0.5).unwrap();
    let argmax = evaluate_multiclass(&model, &corpus, &all).unwrap();
    assert_eq!(binary.confusion, argmax.confusion);
    assert_eq!(binary.confusion.total(), corpus.len() as u64);

    let test = corpus.indices(Split::Test);
    let dump = |m: &ModelParams<f32>| {
        let mut out = Vec::new();
        assert_eq!(write_features(m, &corpus, &test, &mut out).unwrap(), test.len());
        out
    };
    let first = dump(&model);
    assert_eq!(first, dump(&model.clone()));
    let text = String::from_utf8(first).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "label\tbpw\tf1\tf2\tf3\tf4\tf5");
    for line in lines {
        for v in line.split('\t').skip(2) {
            let mantissa = v.split('e').next().unwrap().trim_start_matches('-');
            assert_eq!(mantissa.chars().filter(char::is_ascii_digit).count(), 9, "{v}");
            v.parse::<f64>().unwrap();
        }
    }
}
