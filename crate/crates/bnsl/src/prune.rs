//! Candidate parent-set enumeration with safe pruning, plus the merge of
//! the full-CPT and noisy-OR score sets.
//!
//! Four rules keep the lattice tractable without losing any network in the
//! credible set:
//!
//! 1. a superset scoring at least `epsilon` worse than a scored subset is
//!    dropped (subset rule);
//! 2. a candidate whose penalty term alone exceeds a scored subset's score
//!    plus `epsilon` is dropped together with its whole superset subtree
//!    (penalty rule; the penalty is monotone in cardinality and the
//!    likelihood term is nonnegative);
//! 3. a noisy-OR candidate is infeasible when any record sets the child
//!    with every candidate parent absent (the expansion forces that
//!    observation to probability zero);
//! 4. a noisy-OR candidate whose penalty exceeds the empty-set full-CPT
//!    score plus `epsilon` is dropped (null rule).
//!
//! Every comparison leaves [`SCORE_SLACK`] in favor of keeping, so rounding
//! can only ever retain extra candidates, never remove a credible one.

use crate::cpt;
use crate::data;
use crate::error::{Error, Result};
use crate::model::{
    sort_entries, CountVector, Dataset, LocalScore, ParentSet, RepKind, ScoreTable, SCORE_SLACK,
};
use crate::noisy_or::{self, FitConfig, HotStartCache};
use rayon::prelude::*;
use std::collections::HashMap;

/// Subset rule: prune the superset entry `sup` when the subset entry `sub`
/// already scores at least `epsilon` better (with slack).
pub fn prune_by_subset(sub: &LocalScore, sup: &LocalScore, epsilon: f64) -> Result<bool> {
    if sub.child != sup.child {
        return Err(Error::invalid("subset rule compares entries of one child"));
    }
    if !sub.parents.is_proper_subset_of(&sup.parents) {
        return Err(Error::invalid(
            "subset rule requires a proper subset candidate",
        ));
    }
    Ok(sub.score + epsilon + SCORE_SLACK <= sup.score)
}

/// Penalty rule: with `sub.parents` a proper subset of `sup_parents`, prune
/// `sup_parents` and every superset when the subset's score can no longer be
/// beaten by any candidate paying that penalty. `sup_kind` selects the
/// representation-appropriate penalty term.
pub fn prune_supersets_by_penalty(
    sub: &LocalScore,
    sup_parents: ParentSet,
    sup_kind: RepKind,
    num_rows: usize,
    epsilon: f64,
) -> bool {
    let pen = match sup_kind {
        RepKind::Table => cpt::penalty(sup_parents, num_rows),
        RepKind::NoisyOr => noisy_or::penalty(sup_parents, num_rows),
    };
    sub.score - pen + epsilon < -SCORE_SLACK
}

/// Infeasibility rule: true when some record has the child set while every
/// candidate parent is absent. Covers the stated "parents consistently zero
/// whenever the child is one" case and any other record that would force a
/// zero-probability observation.
pub fn noisyor_infeasible(cv: &CountVector) -> bool {
    noisy_or::infeasible_counts(cv)
}

/// Null rule: prune a noisy-OR candidate whose penalty alone exceeds the
/// empty-set full-CPT score plus `epsilon`.
pub fn prune_noisyor_by_null(
    null_score: f64,
    parents: ParentSet,
    num_rows: usize,
    epsilon: f64,
) -> bool {
    noisy_or::penalty(parents, num_rows) > null_score + epsilon + SCORE_SLACK
}

/// Pruning counters for one node, summed per rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct PruneStats {
    /// Parent sets visited by the lattice walk (per representation branch).
    pub cpt_considered: u64,
    pub nor_considered: u64,
    /// Entries actually scored.
    pub cpt_scored: u64,
    pub nor_scored: u64,
    /// Rule 1 within each branch.
    pub cpt_subset_pruned: u64,
    pub nor_subset_pruned: u64,
    /// Rule 2 subtree cuts (candidates skipped under a blocked root).
    pub cpt_penalty_skipped: u64,
    pub nor_penalty_skipped: u64,
    /// Rule 3.
    pub nor_infeasible: u64,
    /// Rule 4.
    pub nor_null_pruned: u64,
    /// Entries removed by the cross-representation merge.
    pub merge_pruned: u64,
}

impl PruneStats {
    pub fn add(&mut self, other: &PruneStats) {
        self.cpt_considered += other.cpt_considered;
        self.nor_considered += other.nor_considered;
        self.cpt_scored += other.cpt_scored;
        self.nor_scored += other.nor_scored;
        self.cpt_subset_pruned += other.cpt_subset_pruned;
        self.nor_subset_pruned += other.nor_subset_pruned;
        self.cpt_penalty_skipped += other.cpt_penalty_skipped;
        self.nor_penalty_skipped += other.nor_penalty_skipped;
        self.nor_infeasible += other.nor_infeasible;
        self.nor_null_pruned += other.nor_null_pruned;
        self.merge_pruned += other.merge_pruned;
    }

    /// Candidates removed before scoring or dropped afterwards.
    pub fn pruned_total(&self) -> u64 {
        self.cpt_subset_pruned
            + self.nor_subset_pruned
            + self.cpt_penalty_skipped
            + self.nor_penalty_skipped
            + self.nor_infeasible
            + self.nor_null_pruned
            + self.merge_pruned
    }
}

/// Walks the parent-set lattice of one node in cardinality-ascending,
/// lexicographic order, scoring both representations and applying the
/// pruning rules. Returns the retained full-CPT and noisy-OR score lists
/// (sorted ascending) plus the rule counters.
///
/// Subset ordering guarantees every hot start and every rule witness is
/// available before any superset is visited.
pub fn enumerate_node_scores(
    dataset: &Dataset,
    child: usize,
    epsilon: f64,
    cfg: &FitConfig,
    max_parents: Option<usize>,
) -> Result<(Vec<LocalScore>, Vec<LocalScore>, PruneStats)> {
    let n = dataset.num_vars();
    let num_rows = dataset.num_rows();
    let others: Vec<usize> = (0..n).filter(|&v| v != child).collect();
    let cap = max_parents.unwrap_or(others.len()).min(others.len());

    let mut stats = PruneStats::default();
    let mut cpt_scores: HashMap<ParentSet, f64> = HashMap::new();
    let mut nor_scores: HashMap<ParentSet, f64> = HashMap::new();
    let mut cpt_list: Vec<LocalScore> = Vec::new();
    let mut nor_list: Vec<LocalScore> = Vec::new();
    let mut cpt_blocked: Vec<ParentSet> = Vec::new();
    let mut nor_blocked: Vec<ParentSet> = Vec::new();
    let mut cache = HotStartCache::new();

    let null_entry = cpt::bic(dataset, child, ParentSet::EMPTY)?;
    let null_score = null_entry.score;
    cpt_scores.insert(ParentSet::EMPTY, null_score);
    cpt_list.push(null_entry);
    stats.cpt_considered += 1;
    stats.cpt_scored += 1;

    for size in 1..=cap {
        for candidate in subsets_of_size(&others, size) {
            let mut cv: Option<CountVector> = None;

            // Full-CPT branch.
            stats.cpt_considered += 1;
            if cpt_blocked.iter().any(|root| root.is_subset_of(&candidate)) {
                stats.cpt_penalty_skipped += 1;
            } else {
                let counts = data::counts(dataset, child, candidate)?;
                let entry = cpt::bic_from_counts(&counts, num_rows);
                cv = Some(counts);
                stats.cpt_scored += 1;

                if best_subset_score(&cpt_scores, candidate)
                    .map(|s| s - cpt::penalty(candidate, num_rows) + epsilon < -SCORE_SLACK)
                    .unwrap_or(false)
                {
                    // Root of a subtree no full CPT can rescue.
                    cpt_blocked.push(candidate);
                }

                let dominated = best_subset_score(&cpt_scores, candidate)
                    .map(|s| s + epsilon + SCORE_SLACK <= entry.score)
                    .unwrap_or(false);
                cpt_scores.insert(candidate, entry.score);
                if dominated {
                    stats.cpt_subset_pruned += 1;
                } else {
                    cpt_list.push(entry);
                }
            }

            // Noisy-OR branch.
            stats.nor_considered += 1;
            if nor_blocked.iter().any(|root| root.is_subset_of(&candidate)) {
                stats.nor_penalty_skipped += 1;
                continue;
            }
            if prune_noisyor_by_null(null_score, candidate, num_rows, epsilon) {
                stats.nor_null_pruned += 1;
                continue;
            }
            let counts = match cv {
                Some(c) => c,
                None => data::counts(dataset, child, candidate)?,
            };
            if noisyor_infeasible(&counts) {
                stats.nor_infeasible += 1;
                continue;
            }
            let entry = noisy_or::bic_from_counts(&counts, num_rows, &mut cache, cfg)?;
            stats.nor_scored += 1;

            if best_subset_score(&nor_scores, candidate)
                .map(|s| s - noisy_or::penalty(candidate, num_rows) + epsilon < -SCORE_SLACK)
                .unwrap_or(false)
            {
                nor_blocked.push(candidate);
            }

            let dominated = best_subset_score(&nor_scores, candidate)
                .map(|s| s + epsilon + SCORE_SLACK <= entry.score)
                .unwrap_or(false);
            nor_scores.insert(candidate, entry.score);
            if dominated {
                stats.nor_subset_pruned += 1;
            } else {
                nor_list.push(entry);
            }
        }
    }

    sort_entries(&mut cpt_list);
    sort_entries(&mut nor_list);
    Ok((cpt_list, nor_list, stats))
}

/// Best score among already-scored proper subsets of `candidate`.
fn best_subset_score(scored: &HashMap<ParentSet, f64>, candidate: ParentSet) -> Option<f64> {
    scored
        .iter()
        .filter(|(p, _)| p.is_proper_subset_of(&candidate))
        .map(|(_, &s)| s)
        .fold(None, |acc, s| Some(acc.map_or(s, |a: f64| a.min(s))))
}

/// All size-`k` subsets of `pool` as parent sets, in lexicographic order of
/// the chosen indices.
fn subsets_of_size(pool: &[usize], k: usize) -> Vec<ParentSet> {
    let mut out = Vec::new();
    let mut pick = vec![0usize; k];
    fn recurse(pool: &[usize], k: usize, start: usize, pick: &mut Vec<usize>, depth: usize, out: &mut Vec<ParentSet>) {
        if depth == k {
            out.push(ParentSet::from_members(&pick[..depth]));
            return;
        }
        for i in start..pool.len() {
            pick[depth] = pool[i];
            recurse(pool, k, i + 1, pick, depth + 1, out);
        }
    }
    recurse(pool, k, 0, &mut pick, 0, &mut out);
    out
}

/// Merges the two per-node score lists into one, applying the subset rule
/// across representations: an entry falls when the *other* list holds a
/// subset (proper or equal-set, since swapping the representation of the
/// same parent set preserves the DAG) scoring at least `epsilon` better.
/// The result is sorted ascending by score.
pub fn merge_tables(
    cpt_list: &[LocalScore],
    nor_list: &[LocalScore],
    epsilon: f64,
    num_rows: usize,
) -> (Vec<LocalScore>, u64) {
    let mut merged: Vec<LocalScore> = Vec::new();
    let mut dropped = 0u64;

    let survives = |entry: &LocalScore, other: &[LocalScore]| -> bool {
        !other.iter().any(|witness| {
            witness.parents.is_subset_of(&entry.parents)
                && (witness.score + epsilon + SCORE_SLACK <= entry.score
                    || (witness.parents.is_proper_subset_of(&entry.parents)
                        && prune_supersets_by_penalty(
                            witness,
                            entry.parents,
                            entry.rep_kind(),
                            num_rows,
                            epsilon,
                        )))
        })
    };

    for entry in cpt_list {
        if survives(entry, nor_list) {
            merged.push(entry.clone());
        } else {
            dropped += 1;
        }
    }
    for entry in nor_list {
        if survives(entry, cpt_list) {
            merged.push(entry.clone());
        } else {
            dropped += 1;
        }
    }

    sort_entries(&mut merged);
    (merged, dropped)
}

/// Options for whole-dataset scoring.
#[derive(Debug, Clone, Default)]
pub struct ScoreOptions {
    pub max_parents: Option<usize>,
    /// Keep only full-CPT entries (no noisy-OR scoring or merging).
    pub full_cpt_only: bool,
}

/// Scores every node of the dataset (nodes in parallel), merges the two
/// representation lists per node, and assembles the search-ready table.
pub fn score_tables(
    dataset: &Dataset,
    epsilon: f64,
    cfg: &FitConfig,
    options: &ScoreOptions,
) -> Result<(ScoreTable, PruneStats)> {
    let num_rows = dataset.num_rows();
    let per_node: Vec<Result<(Vec<LocalScore>, PruneStats)>> = (0..dataset.num_vars())
        .into_par_iter()
        .map(|child| {
            let (cpt_list, nor_list, mut stats) =
                enumerate_node_scores(dataset, child, epsilon, cfg, options.max_parents)?;
            let merged = if options.full_cpt_only {
                cpt_list
            } else {
                let (merged, dropped) = merge_tables(&cpt_list, &nor_list, epsilon, num_rows);
                stats.merge_pruned += dropped;
                merged
            };
            Ok((merged, stats))
        })
        .collect();

    let mut tables = Vec::with_capacity(dataset.num_vars());
    let mut total = PruneStats::default();
    for item in per_node {
        let (list, stats) = item?;
        total.add(&stats);
        tables.push(list);
    }
    Ok((ScoreTable::new(tables)?, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Representation;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn entry(child: usize, parents: &[usize], kind: RepKind, score: f64) -> LocalScore {
        let parents = ParentSet::from_members(parents);
        let representation = match kind {
            RepKind::Table => Representation::Table(None),
            RepKind::NoisyOr => Representation::NoisyOr(
                crate::model::NoisyOrParams::new(vec![0.5; parents.len()]).unwrap(),
            ),
        };
        LocalScore {
            child,
            parents,
            representation,
            score,
        }
    }

    #[test]
    fn subset_rule_boundaries() {
        let eps = 20.0f64.ln();
        let sub = entry(0, &[1], RepKind::Table, 100.0);
        let sup = entry(0, &[1, 2], RepKind::Table, 103.5);
        assert!(prune_by_subset(&sub, &sup, eps).unwrap());

        let sup = entry(0, &[1, 2], RepKind::Table, 102.5);
        assert!(!prune_by_subset(&sub, &sup, eps).unwrap());

        // Equal scores at epsilon = 0 sit exactly на the boundary; the slack
        // keeps the superset so boundary-tied networks are never lost.
        let sup = entry(0, &[1, 2], RepKind::Table, 100.0);
        assert!(!prune_by_subset(&sub, &sup, 0.0).unwrap());
        // Anything beyond the slack is pruned.
        let sup = entry(0, &[1, 2], RepKind::Table, 100.0 + 1e-6);
        assert!(prune_by_subset(&sub, &sup, 0.0).unwrap());

        // Non-subset pairs are a caller error.
        let other = entry(0, &[3], RepKind::Table, 1.0);
        assert!(prune_by_subset(&other, &sub, 0.0).is_err());
    }

    #[test]
    fn penalty_rule_examples() {
        // sigma(Pi)=10, |Pi'|=3, N=100 full CPT: 10 - 18.42 + 3 < 0.
        let sub = entry(0, &[1], RepKind::Table, 10.0);
        let sup = ParentSet::from_members(&[1, 2, 3]);
        assert!(prune_supersets_by_penalty(&sub, sup, RepKind::Table, 100, 3.0));

        let sub = entry(0, &[1], RepKind::Table, 20.0);
        assert!(!prune_supersets_by_penalty(&sub, sup, RepKind::Table, 100, 3.0));

        // Noisy-OR branch: sigma(Pi)=5, |Pi'|=20, N=1000 -> penalty 69.078.
        let sub = entry(0, &[1], RepKind::NoisyOr, 5.0);
        let sup = ParentSet::from_mask(((1u64 << 20) - 1) << 1);
        assert!(prune_supersets_by_penalty(&sub, sup, RepKind::NoisyOr, 1000, 3.0));
    }

    #[test]
    fn infeasibility_rule() {
        // Only child=1 rows have all parents 0: the stated case.
        let cv = CountVector::new(2, ParentSet::from_members(&[0, 1]), vec![
            [3, 2],
            [4, 0],
            [1, 0],
            [0, 0],
        ]);
        assert!(noisyor_infeasible(&cv));

        // Mixed: one child=1 row with a parent active, another without.
        let cv = CountVector::new(2, ParentSet::from_members(&[0, 1]), vec![
            [3, 1],
            [4, 5],
            [1, 0],
            [0, 0],
        ]);
        assert!(noisyor_infeasible(&cv));

        // Every child=1 row has an active parent: feasible.
        let cv = CountVector::new(2, ParentSet::from_members(&[0, 1]), vec![
            [3, 0],
            [4, 5],
            [1, 2],
            [0, 0],
        ]);
        assert!(!noisyor_infeasible(&cv));
    }

    #[test]
    fn null_rule_examples() {
        let p20 = ParentSet::from_mask((1u64 << 20) - 1);
        let p10 = ParentSet::from_mask((1u64 << 10) - 1);
        assert!(prune_noisyor_by_null(60.0, p20, 1000, 3.0)); // 69.078 > 63
        assert!(!prune_noisyor_by_null(60.0, p10, 1000, 3.0)); // 34.539 <= 63
        assert!(!prune_noisyor_by_null(0.0, p20, 1, 0.0)); // ln 1 = 0 never prunes
    }

    #[test]
    fn merge_worked_example() {
        // cpt {{}:50, {A}:49}, nor {{A}:47}, eps=1: the noisy-OR entry at 47
        // prunes the same-set table entry at 49; the empty set survives
        // because supersets never prune subsets.
        let cpt_list = vec![
            entry(1, &[], RepKind::Table, 50.0),
            entry(1, &[0], RepKind::Table, 49.0),
        ];
        let nor_list = vec![entry(1, &[0], RepKind::NoisyOr, 47.0)];
        let (merged, dropped) = merge_tables(&cpt_list, &nor_list, 1.0, 100);
        assert_eq!(dropped, 1);
        let kinds: Vec<(RepKind, f64)> = merged.iter().map(|e| (e.rep_kind(), e.score)).collect();
        assert_eq!(kinds, vec![(RepKind::NoisyOr, 47.0), (RepKind::Table, 50.0)]);
    }

    #[test]
    fn merge_keeps_close_twins_and_empty_nor() {
        // Identical parent set, noisy-OR better but within epsilon: both stay.
        let cpt_list = vec![
            entry(1, &[], RepKind::Table, 50.0),
            entry(1, &[0], RepKind::Table, 47.5),
        ];
        let nor_list = vec![entry(1, &[0], RepKind::NoisyOr, 47.0)];
        let (merged, dropped) = merge_tables(&cpt_list, &nor_list, 1.0, 100);
        assert_eq!(dropped, 0);
        assert_eq!(merged.len(), 3);

        // Empty noisy-OR list: result is the table list.
        let (merged, dropped) = merge_tables(&cpt_list, &[], 1.0, 100);
        assert_eq!(dropped, 0);
        assert_eq!(merged.len(), 2);
    }

    #[test]
    fn enumerate_respects_parent_cap_and_keeps_empty_set() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<u8>> = (0..60)
            .map(|_| (0..5).map(|_| rng.gen_range(0..2u8)).collect())
            .collect();
        let ds = Dataset::from_rows((0..5).map(|i| format!("V{i}")).collect(), &rows).unwrap();
        let cfg = FitConfig::default();
        let (cpt_list, nor_list, _) =
            enumerate_node_scores(&ds, 0, 20.0f64.ln(), &cfg, Some(2)).unwrap();
        assert!(cpt_list.iter().all(|e| e.parents.len() <= 2));
        assert!(nor_list.iter().all(|e| e.parents.len() <= 2));
        assert!(cpt_list.iter().any(|e| e.parents.is_empty()));
    }

    /// Unpruned retained set must coincide with the brute-force application
    /// of the rules over exhaustively scored candidates.
    #[test]
    fn enumeration_matches_brute_force_rule_application() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for trial in 0..5 {
            let n = 4usize;
            let rows: Vec<Vec<u8>> = (0..100)
                .map(|_| (0..n).map(|_| rng.gen_range(0..2u8)).collect())
                .collect();
            let ds = Dataset::from_rows((0..n).map(|i| format!("V{i}")).collect(), &rows).unwrap();
            let eps = 20.0f64.ln();
            let cfg = FitConfig::default();
            let child = trial % n;

            let (cpt_list, _, _) = enumerate_node_scores(&ds, child, eps, &cfg, None).unwrap();
            let got: Vec<(u64, f64)> = cpt_list.iter().map(|e| (e.parents.mask(), e.score)).collect();

            // Brute force: score all 2^3 candidates, then drop every entry
            // with a subset witness at least eps better.
            let others: Vec<usize> = (0..n).filter(|&v| v != child).collect();
            let mut all: Vec<LocalScore> = Vec::new();
            for mask in 0u64..(1 << others.len()) {
                let members: Vec<usize> = others
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| (mask >> p) & 1 == 1)
                    .map(|(_, &v)| v)
                    .collect();
                all.push(cpt::bic(&ds, child, ParentSet::from_members(&members)).unwrap());
            }
            let mut expected: Vec<(u64, f64)> = all
                .iter()
                .filter(|e| {
                    !all.iter().any(|w| {
                        w.parents.is_proper_subset_of(&e.parents)
                            && w.score + eps + SCORE_SLACK <= e.score
                    })
                })
                .map(|e| (e.parents.mask(), e.score))
                .collect();
            expected.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));

            assert_eq!(got, expected, "child {child}");
        }
    }
}
