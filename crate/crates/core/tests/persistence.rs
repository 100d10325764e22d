//! File-level round trips: models, bound-check reports, and curve rows all
//! survive disk unchanged, and malformed inputs fail with named reasons.

use rwd_core::dist::NextTokenDistribution;
use rwd_core::error::Error;
use rwd_core::harness::{read_curve, read_jsonl, write_curve, write_jsonl, CurveRow};
use rwd_core::lm::{load_model, save_model, LanguageModel, Model, NGramLm, TableLm};
use rwd_core::oracle::{theorem_check, DEFAULT_LEAF_BUDGET};
use rwd_core::seed::{mix, rng_from};
use rwd_core::vocab::{TokenId, TokenSeq, Vocabulary};

use rand::Rng;

/// Every context of length <= 2 produces the same row before and after disk.
fn assert_same_rows(a: &dyn LanguageModel, b: &dyn LanguageModel) {
    assert_eq!(a.vocab().size(), b.vocab().size());
    assert_eq!(a.vocab().eos(), b.vocab().eos());
    let mut contexts: Vec<TokenSeq> = vec![vec![]];
    for t in a.vocab().tokens() {
        contexts.push(vec![t]);
        for u in a.vocab().tokens() {
            contexts.push(vec![t, u]);
        }
    }
    for context in contexts {
        assert_eq!(
            a.next_distribution(&context).probs(),
            b.next_distribution(&context).probs(),
            "context {context:?}"
        );
    }
}

#[test]
fn random_table_models_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for trial in 0..20u64 {
        let mut rng = rng_from(mix(51, trial));
        let vocab_size = rng.gen_range(2..=5);
        let vocab = if trial % 2 == 0 {
            Vocabulary::new(vocab_size)
        } else {
            Vocabulary::with_eos(vocab_size, TokenId(rng.gen_range(0..vocab_size) as u32))
        };
        let mut entries = Vec::new();
        for t in 0..vocab_size as u32 {
            let weights: Vec<f64> = (0..vocab_size).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            entries.push((
                vec![TokenId(t)],
                NextTokenDistribution::new(weights.iter().map(|w| w / total).collect()).unwrap(),
            ));
        }
        let model = Model::from(
            TableLm::new(vocab, entries, NextTokenDistribution::uniform(vocab_size)).unwrap(),
        );
        let path = dir.path().join(format!("table-{trial}.json"));
        save_model(&path, &model).unwrap();
        assert_same_rows(&model, &load_model(&path).unwrap());
    }
}

#[test]
fn trained_ngram_models_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    for trial in 0..20u64 {
        let mut rng = rng_from(mix(52, trial));
        let vocab_size = rng.gen_range(2..=4);
        let order = rng.gen_range(1..=3);
        let corpus: Vec<TokenSeq> = (0..6)
            .map(|_| (0..10).map(|_| TokenId(rng.gen_range(0..vocab_size) as u32)).collect())
            .collect();
        let model = Model::from(
            NGramLm::train(Vocabulary::new(vocab_size), order, 0.5, &corpus).unwrap(),
        );
        let path = dir.path().join(format!("ngram-{trial}.json"));
        save_model(&path, &model).unwrap();
        assert_same_rows(&model, &load_model(&path).unwrap());
    }
}

#[test]
fn saved_models_are_stable_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = vec![vec![TokenId(0), TokenId(1), TokenId(0)]];
    let model = Model::from(NGramLm::train(Vocabulary::new(2), 2, 1.0, &corpus).unwrap());
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    save_model(&a, &model).unwrap();
    save_model(&b, &load_model(&a).unwrap()).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn malformed_model_files_name_their_problem() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<(&str, &str)> = vec![
        ("not json at all", "syntax"),
        (r#"{"type":"matrix","vocab_size":2}"#, "unknown variant"),
        (
            r#"{"type":"table","vocab_size":2,"eos":null,"entries":{"0":[0.5]},"fallback":[0.5,0.5]}"#,
            "row length",
        ),
        (
            r#"{"type":"table","vocab_size":2,"eos":null,"entries":{"x":[0.5,0.5]},"fallback":[0.5,0.5]}"#,
            "token key",
        ),
        (
            r#"{"type":"table","vocab_size":2,"eos":7,"entries":{},"fallback":[0.5,0.5]}"#,
            "eos",
        ),
        (
            r#"{"type":"ngram","vocab_size":2,"eos":null,"counts":{"0":[1,2],"0,1":[3,4]},"alpha":1.0}"#,
            "context length",
        ),
        (
            r#"{"type":"table","vocab_size":2,"eos":null,"entries":{},"fallback":[0.9,0.5]}"#,
            "mass",
        ),
    ];
    for (i, (text, _why)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad-{i}.json"));
        std::fs::write(&path, text).unwrap();
        assert!(load_model(&path).is_err(), "case {i} loaded: {text}");
    }
}

#[test]
fn reports_round_trip_with_renamed_fields() {
    let dir = tempfile::tempdir().unwrap();
    let model = rwd_core::DirichletLm::new(Vocabulary::new(4), 1, 0.3, 99).unwrap();
    let reports: Vec<_> = (0..5)
        .map(|t| theorem_check(&model, &[], t + 2, DEFAULT_LEAF_BUDGET).unwrap())
        .collect();
    let path = dir.path().join("reports.jsonl");
    write_jsonl(&path, &reports).unwrap();

    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    for line in text.lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["L", "K_set", "epsilon_L", "max_conditional_at_L", "theorem_holds"] {
            assert!(value.get(key).is_some(), "missing {key} in {line}");
        }
    }
    let back: Vec<rwd_core::oracle::TheoremReport> = read_jsonl(&path).unwrap();
    assert_eq!(back, reports);
}

#[test]
fn curve_rows_round_trip_through_csv() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("curve.csv");
    let rows: Vec<CurveRow> = (0..12)
        .map(|i| CurveRow {
            offset: i / 4,
            t: i % 4 + 1,
            fraction: (i as f64) / 12.0,
            trials: 100,
            seed: 7,
        })
        .collect();
    write_curve(&path, &rows).unwrap();
    assert_eq!(read_curve(&path).unwrap(), rows);
}

#[test]
fn jsonl_reads_skip_blank_lines_but_reject_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.jsonl");
    std::fs::write(
        &path,
        "{\"offset\":0,\"T\":1,\"fraction\":1.0,\"trials\":5,\"seed\":0}\n\n{\"offset\":1,\"T\":2,\"fraction\":0.5,\"trials\":5,\"seed\":0}\n",
    )
    .unwrap();
    let rows: Vec<CurveRow> = read_jsonl(&path).unwrap();
    assert_eq!(rows.len(), 2);

    std::fs::write(&path, "{\"offset\":0}\n").unwrap();
    match read_jsonl::<CurveRow>(&path) {
        Err(Error::JsonlLine { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected a line error, got {other:?}"),
    }
}
