//! Exact sequence-level oracles.
//!
//! The exhaustive oracle defines the ground truth: the highest-joint-prob
//! sequence of a fixed length, ties to the lexicographically smallest. The
//! branch-and-bound oracle must return bit-identical answers and exists so
//! sweeps stay cheap. On top of both sits a checker for the suboptimality
//! bound: whenever stepwise decoding diverges from the optimum, the
//! step-L conditional mass of the stepwise prefix is bounded by
//! epsilon_L = f(optimal prefix L) / f(stepwise prefix L-1) < 1.

use crate::dist::{LogProb, LOG_TOL};
use crate::error::Error;
use crate::lm::LanguageModel;
use crate::strategies::greedy_fixed;
use crate::vocab::{TokenId, TokenSeq};
use serde::{Deserialize, Serialize};

/// Leaf budget above which enumeration refuses to run.
pub const DEFAULT_LEAF_BUDGET: u64 = 10_000_000;

/// Number of length-t sequences, saturating at u128::MAX.
pub fn leaf_count(vocab_size: usize, t: usize) -> u128 {
    let mut total: u128 = 1;
    for _ in 0..t {
        total = total.saturating_mul(vocab_size as u128);
    }
    total
}

fn check_budget(vocab_size: usize, t: usize, budget: u64) -> Result<(), Error> {
    let leaves = leaf_count(vocab_size, t);
    if leaves > budget as u128 {
        return Err(Error::Intractable { leaves, budget });
    }
    Ok(())
}

/// A globally optimal sequence and its joint log-prob.
#[derive(Clone, PartialEq, Debug)]
pub struct OptimumResult {
    pub tokens: TokenSeq,
    pub logprob: LogProb,
}

/// Search counters for the branch-and-bound oracle.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BnbStats {
    /// Internal nodes whose row was queried.
    pub nodes_expanded: u64,
}

// ── Exhaustive enumeration ──

/// Visits every length-t continuation in lexicographic order and keeps the
/// strict maximum, so ties resolve to the lexicographically smallest
/// sequence by construction.
pub fn global_optimum_exhaustive(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    t: usize,
    budget: u64,
) -> Result<OptimumResult, Error> {
    check_budget(model.vocab().size(), t, budget)?;
    let mut context = prompt.to_vec();
    let mut best: Option<(f64, TokenSeq)> = None;
    exhaustive_dfs(model, &mut context, prompt.len(), t, 0.0, &mut best);
    let (score, tokens) = best.expect("at least one sequence exists for t >= 0");
    Ok(OptimumResult { tokens, logprob: LogProb::new(score.min(0.0)) })
}

fn exhaustive_dfs(
    model: &dyn LanguageModel,
    context: &mut TokenSeq,
    prompt_len: usize,
    remaining: usize,
    score: f64,
    best: &mut Option<(f64, TokenSeq)>,
) {
    if remaining == 0 {
        let better = match best {
            None => true,
            Some((b, _)) => score > *b,
        };
        if better {
            *best = Some((score, context[prompt_len..].to_vec()));
        }
        return;
    }
    let row = model.next_distribution(context);
    for token in model.vocab().tokens() {
        context.push(token);
        exhaustive_dfs(model, context, prompt_len, remaining - 1, score + row.log_prob(token).value(), best);
        context.pop();
    }
}

// ── Branch and bound ──

/// Same answer as [`global_optimum_exhaustive`], including tie-breaks, with
/// admissible pruning: a prefix's joint never increases, so any prefix
/// scoring strictly below the incumbent is dropped; equal scores are chased
/// for the lexicographic winner.
pub fn global_optimum_bnb(model: &dyn LanguageModel, prompt: &[TokenId], t: usize) -> OptimumResult {
    global_optimum_bnb_with_stats(model, prompt, t).0
}

/// Branch and bound plus its node counter.
pub fn global_optimum_bnb_with_stats(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    t: usize,
) -> (OptimumResult, BnbStats) {
    let mut context = prompt.to_vec();
    let mut best: Option<(f64, TokenSeq)> = None;
    let mut nodes = 0u64;
    bnb_dfs(model, &mut context, prompt.len(), t, 0.0, &mut best, &mut nodes);
    let (score, tokens) = best.expect("at least one sequence exists for t >= 0");
    (OptimumResult { tokens, logprob: LogProb::new(score.min(0.0)) }, BnbStats { nodes_expanded: nodes })
}

fn bnb_dfs(
    model: &dyn LanguageModel,
    context: &mut TokenSeq,
    prompt_len: usize,
    remaining: usize,
    score: f64,
    best: &mut Option<(f64, TokenSeq)>,
    nodes: &mut u64,
) {
    if remaining == 0 {
        let candidate = &context[prompt_len..];
        let better = match best {
            None => true,
            Some((b, tokens)) => score > *b || (score == *b && candidate < tokens.as_slice()),
        };
        if better {
            *best = Some((score, candidate.to_vec()));
        }
        return;
    }
    *nodes += 1;
    let row = model.next_distribution(context);
    // Descending child probability reaches a strong incumbent fast; the id
    // tie-break keeps the walk deterministic.
    let mut order: Vec<TokenId> = model.vocab().tokens().collect();
    order.sort_by(|a, b| row.prob(*b).total_cmp(&row.prob(*a)).then(a.cmp(b)));
    for token in order {
        let child = score + row.log_prob(token).value();
        if let Some((b, _)) = best {
            // Extensions only lower the score: strictly-below cannot win or
            // tie, equal must continue for the lexicographic chase.
            if child < *b {
                continue;
            }
        }
        context.push(token);
        bnb_dfs(model, context, prompt_len, remaining - 1, child, best, nodes);
        context.pop();
    }
}

// ── Assumption screening ──

/// Whether the joints of `a` and `b` after `prompt` are numerically
/// unambiguous at `tol`: at every length where the two prefixes differ as
/// sequences, their log-probabilities must differ by more than `tol`.
///
/// The bound only ever compares the stepwise and the optimal prefix, so
/// only those comparisons are screened. Demanding distinctness of all
/// |V|^m joints at every depth instead would reject a constant fraction
/// of random instances on birthday collisions between sequences the bound
/// never looks at.
pub fn check_strict_preference(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    a: &[TokenId],
    b: &[TokenId],
    tol: f64,
) -> bool {
    let fa = prefix_logprobs(model, prompt, a);
    let fb = prefix_logprobs(model, prompt, b);
    for m in 1..=a.len().min(b.len()) {
        if a[..m] != b[..m] {
            let gap = fa[m] - fb[m];
            // A NaN gap means two impossible prefixes tied at -inf.
            if !(gap.abs() > tol) {
                return false;
            }
        }
    }
    true
}

// ── Theorem checking ──

/// One instance's verdict on the suboptimality bound.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Stepwise-optimal response of length T.
    pub greedy: TokenSeq,
    /// Its joint log-prob.
    pub greedy_logprob: f64,
    /// Globally optimal response of length T.
    pub optimal: TokenSeq,
    /// Its joint log-prob.
    pub optimal_logprob: f64,
    /// The two responses agree; nothing to check.
    pub identical: bool,
    /// First step where the optimal prefix is strictly more probable.
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Steps before L where the tokens differ and the stepwise prefix is
    /// strictly more probable.
    #[serde(rename = "K_set")]
    pub k_set: Vec<usize>,
    /// f(optimal prefix L) / f(stepwise prefix L-1), linear space.
    #[serde(rename = "epsilon_L")]
    pub epsilon_l: Option<f64>,
    /// Largest conditional probability at step L after the stepwise prefix.
    #[serde(rename = "max_conditional_at_L")]
    pub max_conditional_at_l: Option<f64>,
    /// Some(true) iff max_conditional_at_L < epsilon_L < 1; None when
    /// identical or skipped.
    pub theorem_holds: Option<bool>,
    /// Why the instance was skipped, if it was.
    pub skipped_reason: Option<String>,
}

/// Aggregate counts for a sweep of theorem checks.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct SweepSummary {
    pub instances: usize,
    pub identical: usize,
    pub skipped: usize,
    pub holds: usize,
    pub violations: usize,
}

impl SweepSummary {
    /// Folds one report into the counts.
    pub fn absorb(&mut self, report: &TheoremReport) {
        self.instances += 1;
        if report.identical {
            self.identical += 1;
        } else if report.skipped_reason.is_some() {
            self.skipped += 1;
        } else if report.theorem_holds == Some(true) {
            self.holds += 1;
        } else {
            self.violations += 1;
        }
    }
}

/// Cumulative prefix log-probs [0, f(1), ..., f(len)] of `tokens` after
/// `prompt`.
fn prefix_logprobs(model: &dyn LanguageModel, prompt: &[TokenId], tokens: &[TokenId]) -> Vec<f64> {
    let mut context = prompt.to_vec();
    let mut out = Vec::with_capacity(tokens.len() + 1);
    let mut acc = 0.0;
    out.push(acc);
    for &token in tokens {
        acc += model.next_distribution(&context).log_prob(token).value();
        context.push(token);
        out.push(acc);
    }
    out
}

/// Compares stepwise decoding against the exact optimum of length t and
/// verifies the suboptimality bound at the first manifestation step.
///
/// EOS gets no special treatment: theorem fixtures are EOS-free and the
/// stepwise baseline runs a fixed t steps.
pub fn theorem_check(
    model: &dyn LanguageModel,
    prompt: &[TokenId],
    t: usize,
    budget: u64,
) -> Result<TheoremReport, Error> {
    assert!(t >= 1, "theorem check needs at least one step");
    let (greedy, greedy_score) = greedy_fixed(model, prompt, t);
    let optimum = global_optimum_exhaustive(model, prompt, t, budget)?;

    let mut report = TheoremReport {
        greedy: greedy.clone(),
        greedy_logprob: greedy_score.value(),
        optimal: optimum.tokens.clone(),
        optimal_logprob: optimum.logprob.value(),
        identical: greedy == optimum.tokens,
        l: None,
        k_set: Vec::new(),
        epsilon_l: None,
        max_conditional_at_l: None,
        theorem_holds: None,
        skipped_reason: None,
    };
    if report.identical {
        return Ok(report);
    }

    if !check_strict_preference(model, prompt, &greedy, &optimum.tokens, LOG_TOL) {
        report.skipped_reason = Some("strict preference fails within tolerance".into());
        return Ok(report);
    }

    let f_greedy = prefix_logprobs(model, prompt, &greedy);
    let f_optimal = prefix_logprobs(model, prompt, &optimum.tokens);

    // First manifestation: the earliest length where the optimal prefix is
    // strictly more probable. Screened preference guarantees it exists.
    let l = (1..=t)
        .find(|&m| f_optimal[m] - f_greedy[m] > LOG_TOL)
        .expect("distinct sequences must manifest by step t");
    report.l = Some(l);

    // Irreversibility: once manifested, the gap never flips back.
    for m in l..=t {
        if f_greedy[m] - f_optimal[m] > -LOG_TOL {
            report.skipped_reason = Some("irreversible advantage fails".into());
            return Ok(report);
        }
    }

    report.k_set = (1..l)
        .filter(|&k| greedy[k - 1] != optimum.tokens[k - 1] && f_greedy[k] - f_optimal[k] > LOG_TOL)
        .collect();

    let mut context = prompt.to_vec();
    context.extend_from_slice(&greedy[..l - 1]);
    let row = model.next_distribution(&context);
    let max_conditional = row.probs().iter().cloned().fold(0.0f64, f64::max);
    let eps_log = f_optimal[l] - f_greedy[l - 1];
    report.epsilon_l = Some(eps_log.exp());
    report.max_conditional_at_l = Some(max_conditional);
    report.theorem_holds = Some(max_conditional.ln() < eps_log && eps_log < 0.0);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::NextTokenDistribution;
    use crate::lm::TableLm;
    use crate::vocab::Vocabulary;

    fn two_token_table() -> TableLm {
        TableLm::new(
            Vocabulary::new(2),
            vec![
                (vec![], NextTokenDistribution::new(vec![0.6, 0.4]).unwrap()),
                (vec![TokenId(0)], NextTokenDistribution::new(vec![0.55, 0.45]).unwrap()),
                (vec![TokenId(1)], NextTokenDistribution::new(vec![0.9, 0.1]).unwrap()),
            ],
            NextTokenDistribution::uniform(2),
        )
        .unwrap()
    }

    #[test]
    fn exhaustive_finds_the_frozen_optimum() {
        let m = two_token_table();
        let opt = global_optimum_exhaustive(&m, &[], 2, DEFAULT_LEAF_BUDGET).unwrap();
        assert_eq!(opt.tokens, vec![TokenId(1), TokenId(0)]);
        assert!((opt.logprob.value() - (-1.021_651_247_5)).abs() < 1e-9);
    }

    #[test]
    fn bnb_matches_exhaustive_on_the_frozen_fixture() {
        let m = two_token_table();
        let a = global_optimum_exhaustive(&m, &[], 2, DEFAULT_LEAF_BUDGET).unwrap();
        let (b, stats) = global_optimum_bnb_with_stats(&m, &[], 2);
        assert_eq!(a, b);
        assert!(stats.nodes_expanded <= 3, "two-token depth-2 tree has 3 internal nodes");
    }

    #[test]
    fn tie_break_is_lexicographic_in_both_oracles() {
        let m = TableLm::new(Vocabulary::new(2), vec![], NextTokenDistribution::uniform(2)).unwrap();
        let a = global_optimum_exhaustive(&m, &[], 3, DEFAULT_LEAF_BUDGET).unwrap();
        let b = global_optimum_bnb(&m, &[], 3);
        assert_eq!(a.tokens, vec![TokenId(0); 3]);
        assert_eq!(a, b);
    }

    #[test]
    fn budget_gate_reports_leaf_count() {
        let m = two_token_table();
        match global_optimum_exhaustive(&m, &[], 30, 1000) {
            Err(Error::Intractable { leaves, budget }) => {
                assert_eq!(leaves, 1u128 << 30);
                assert_eq!(budget, 1000);
            }
            other => panic!("expected budget error, got {other:?}"),
        }
    }

    #[test]
    fn strict_preference_screens_ties() {
        let m = two_token_table();
        let a = [TokenId(0), TokenId(0)];
        let b = [TokenId(1), TokenId(0)];
        assert!(check_strict_preference(&m, &[], &a, &b, LOG_TOL));
        // Shared prefixes are never compared against themselves.
        let c = [TokenId(0), TokenId(1)];
        assert!(check_strict_preference(&m, &[], &a, &c, LOG_TOL));

        let tied = TableLm::new(
            Vocabulary::new(2),
            vec![(vec![], NextTokenDistribution::new(vec![0.5, 0.5]).unwrap())],
            NextTokenDistribution::new(vec![0.7, 0.3]).unwrap(),
        )
        .unwrap();
        assert!(!check_strict_preference(&tied, &[], &[TokenId(0)], &[TokenId(1)], LOG_TOL));
    }

    #[test]
    fn strict_preference_treats_impossible_pairs_as_ties() {
        // Both sequences pass through a zero-probability step; their joints
        // tie at -inf and the gap is NaN.
        let m = TableLm::new(
            Vocabulary::new(2),
            vec![(vec![], NextTokenDistribution::new(vec![1.0, 0.0]).unwrap())],
            NextTokenDistribution::new(vec![0.7, 0.3]).unwrap(),
        )
        .unwrap();
        let a = [TokenId(1), TokenId(0)];
        let b = [TokenId(1), TokenId(1)];
        assert!(!check_strict_preference(&m, &[], &a, &b, LOG_TOL));
    }

    #[test]
    fn theorem_frozen_two_token_instance() {
        let m = two_token_table();
        let report = theorem_check(&m, &[], 2, DEFAULT_LEAF_BUDGET).unwrap();
        assert!(!report.identical);
        assert_eq!(report.greedy, vec![TokenId(0), TokenId(0)]);
        assert_eq!(report.optimal, vec![TokenId(1), TokenId(0)]);
        assert_eq!(report.l, Some(2));
        assert_eq!(report.k_set, vec![1]);
        assert!((report.epsilon_l.unwrap() - 0.6).abs() < 1e-9);
        assert!((report.max_conditional_at_l.unwrap() - 0.55).abs() < 1e-9);
        assert_eq!(report.theorem_holds, Some(true));
        assert_eq!(report.skipped_reason, None);
    }

    #[test]
    fn theorem_identical_when_stepwise_is_optimal() {
        // A single peaked row everywhere: stepwise argmax IS the optimum.
        let m = TableLm::new(
            Vocabulary::new(3),
            vec![],
            NextTokenDistribution::new(vec![0.7, 0.2, 0.1]).unwrap(),
        )
        .unwrap();
        let report = theorem_check(&m, &[], 4, DEFAULT_LEAF_BUDGET).unwrap();
        assert!(report.identical);
        assert_eq!(report.theorem_holds, None);
        assert_eq!(report.l, None);
    }

    #[test]
    fn theorem_skips_tied_instances() {
        let tied = TableLm::new(
            Vocabulary::new(2),
            vec![
                (vec![], NextTokenDistribution::new(vec![0.5, 0.5]).unwrap()),
                (vec![TokenId(0)], NextTokenDistribution::new(vec![0.3, 0.7]).unwrap()),
                (vec![TokenId(1)], NextTokenDistribution::new(vec![0.8, 0.2]).unwrap()),
            ],
            NextTokenDistribution::uniform(2),
        )
        .unwrap();
        let report = theorem_check(&tied, &[], 2, DEFAULT_LEAF_BUDGET).unwrap();
        assert!(report.skipped_reason.is_some());
        assert_eq!(report.theorem_holds, None);
    }

    #[test]
    fn report_wire_names_are_frozen() {
        let m = two_token_table();
        let report = theorem_check(&m, &[], 2, DEFAULT_LEAF_BUDGET).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        for field in ["greedy", "optimal", "L", "K_set", "epsilon_L", "max_conditional_at_L", "theorem_holds"] {
            assert!(json.get(field).is_some(), "missing field {field}");
        }
        let back: TheoremReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }
}
