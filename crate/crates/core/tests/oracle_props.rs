//! Cross-validation of the two sequence-level oracles and structural
//! invariants of bound-check reports on random instances.

use rwd_core::dist::{NextTokenDistribution, LOG_TOL};
use rwd_core::error::Error;
use rwd_core::lm::{DirichletLm, LanguageModel, TableLm};
use rwd_core::oracle::{
    global_optimum_bnb_with_stats, global_optimum_exhaustive, leaf_count, theorem_check,
    DEFAULT_LEAF_BUDGET,
};
use rwd_core::seed::mix;
use rwd_core::vocab::{TokenId, Vocabulary};

fn dirichlet(vocab_size: usize, alpha: f64, seed: u64) -> DirichletLm {
    DirichletLm::new(Vocabulary::new(vocab_size), 1, alpha, seed).unwrap()
}

#[test]
fn branch_and_bound_matches_exhaustive_search_exactly() {
    for trial in 0..120u64 {
        let vocab_size = 2 + (trial % 5) as usize;
        let t = 1 + (trial % 5) as usize;
        let alpha = [0.1, 0.5, 2.0][(trial % 3) as usize];
        let model = dirichlet(vocab_size, alpha, mix(31, trial));
        let full = global_optimum_exhaustive(&model, &[], t, DEFAULT_LEAF_BUDGET).unwrap();
        let (pruned, stats) = global_optimum_bnb_with_stats(&model, &[], t);
        // Both accumulate scores along the same prefix path, so the values
        // are bit-identical, not merely close.
        assert_eq!(pruned.tokens, full.tokens, "trial {trial}");
        assert_eq!(pruned.logprob.value(), full.logprob.value(), "trial {trial}");
        let nodes_in_tree: u128 = (1..=t).map(|d| (vocab_size as u128).pow(d as u32)).sum();
        assert!(u128::from(stats.nodes_expanded) <= nodes_in_tree, "trial {trial}");
    }
}

#[test]
fn oracles_agree_on_prompted_instances() {
    for trial in 0..40u64 {
        let model = dirichlet(4, 0.4, mix(32, trial));
        let prompt = vec![TokenId((trial % 4) as u32), TokenId(((trial / 4) % 4) as u32)];
        let full = global_optimum_exhaustive(&model, &prompt, 4, DEFAULT_LEAF_BUDGET).unwrap();
        let (pruned, _) = global_optimum_bnb_with_stats(&model, &prompt, 4);
        assert_eq!(pruned.tokens, full.tokens);
        assert_eq!(pruned.logprob.value(), full.logprob.value());
    }
}

#[test]
fn exhaustive_search_respects_its_leaf_budget() {
    let model = dirichlet(6, 0.5, 1);
    assert_eq!(leaf_count(6, 10), 6u128.pow(10));
    match global_optimum_exhaustive(&model, &[], 10, 1000) {
        Err(Error::Intractable { leaves, budget }) => {
            assert_eq!(leaves, 6u128.pow(10));
            assert_eq!(budget, 1000);
        }
        other => panic!("expected an intractable error, got {other:?}"),
    }
    // Exactly at budget is allowed.
    assert!(global_optimum_exhaustive(&model, &[], 2, 36).is_ok());
}

#[test]
fn reports_satisfy_the_structural_invariants() {
    let t = 4;
    let mut held = 0;
    for trial in 0..300u64 {
        let model = dirichlet(4, 0.3, mix(33, trial));
        let report = theorem_check(&model, &[], t, DEFAULT_LEAF_BUDGET).unwrap();

        // The two joints always describe their sequences.
        assert!(
            (model.joint_log_prob(&[], &report.greedy).value() - report.greedy_logprob).abs()
                < LOG_TOL
        );
        assert!(
            (model.joint_log_prob(&[], &report.optimal).value() - report.optimal_logprob).abs()
                < LOG_TOL
        );
        assert!(report.greedy_logprob <= report.optimal_logprob + LOG_TOL);

        if report.identical {
            assert_eq!(report.greedy, report.optimal);
            assert_eq!(report.theorem_holds, None);
            continue;
        }
        if report.skipped_reason.is_some() {
            assert_eq!(report.theorem_holds, None);
            continue;
        }

        held += 1;
        let l = report.l.expect("checked instances name L");
        assert!((2..=t).contains(&l), "trial {trial}: L = {l}");
        // L is the first strict win for the optimal prefix: earlier
        // prefixes never beat greedy's.
        for m in 1..l {
            let g = model.joint_log_prob(&[], &report.greedy[..m]).value();
            let o = model.joint_log_prob(&[], &report.optimal[..m]).value();
            assert!(o - g <= LOG_TOL, "trial {trial}: optimal won already at {m}");
        }
        assert!(!report.k_set.is_empty(), "trial {trial}: empty divergence set");
        for &k in &report.k_set {
            assert!(k >= 1 && k < l);
            assert_ne!(report.greedy[k - 1], report.optimal[k - 1]);
        }
        let eps = report.epsilon_l.expect("checked instances carry epsilon");
        let cap = report.max_conditional_at_l.expect("checked instances carry the row max");
        assert_eq!(report.theorem_holds, Some(true), "trial {trial}");
        assert!(cap < eps && eps < 1.0, "trial {trial}: {cap} vs {eps}");
    }
    assert!(held >= 50, "ensemble too tame to exercise the bound: {held}");
}

#[test]
fn tied_rows_are_screened_out() {
    // Every continuation shares the same joint probability, so strict
    // preference cannot hold anywhere.
    let model = TableLm::new(
        Vocabulary::new(2),
        vec![],
        NextTokenDistribution::uniform(2),
    )
    .unwrap();
    let report = theorem_check(&model, &[], 3, DEFAULT_LEAF_BUDGET).unwrap();
    assert!(report.identical || report.skipped_reason.is_some());
}

#[test]
fn budget_errors_surface_from_theorem_checks() {
    let model = dirichlet(5, 0.3, 9);
    match theorem_check(&model, &[], 12, 1 << 10) {
        Err(Error::Intractable { .. }) => {}
        other => panic!("expected an intractable error, got {other:?}"),
    }
}
