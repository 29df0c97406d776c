//! Leave-one-out ranking evaluation (HR@k, NDCG@k) and top-k lists.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::Interactions;
use crate::scoring::Scorer;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateMode {
    /// Target plus uniformly sampled non-interacted items.
    Sampled,
    /// Target plus every non-interacted item.
    AllItems,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RankingProtocol {
    pub num_sampled_negatives: usize,
    pub cutoff: usize,
    pub candidate_mode: CandidateMode,
}

impl Default for RankingProtocol {
    fn default() -> Self {
        RankingProtocol {
            num_sampled_negatives: 100,
            cutoff: 10,
            candidate_mode: CandidateMode::Sampled,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankingReport {
    /// (user, 1-based rank of the held-out item), ascending by user.
    pub per_user: Vec<(usize, usize)>,
    /// Users without any sampleable negative.
    pub skipped: Vec<usize>,
    pub cutoff: usize,
    pub hr_at_k: f64,
    pub ndcg_at_k: f64,
}

/// 1-based rank of `target` among `candidates`; ties go to the lower item index.
pub fn rank_of(target: usize, target_score: f64, candidates: &[usize], scores: &[f64]) -> usize {
    1 + candidates
        .iter()
        .zip(scores)
        .filter(|&(&j, &s)| j != target && (s > target_score || (s == target_score && j < target)))
        .count()
}

pub fn ndcg_contribution(rank: usize, cutoff: usize) -> f64 {
    if rank <= cutoff {
        1.0 / ((rank + 1) as f64).log2()
    } else {
        0.0
    }
}

fn user_rng(seed: u64, user: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(user as u64);
    rng
}

/// Up to `n` distinct items outside `known` (sorted), uniformly chosen.
pub fn sample_uniform_negatives(
    num_items: usize,
    known: &[usize],
    n: usize,
    rng: &mut impl Rng,
) -> Vec<usize> {
    let available = num_items - known.len();
    if available <= 2 * n {
        let allowed: Vec<usize> = (0..num_items)
            .filter(|j| known.binary_search(j).is_err())
            .collect();
        if allowed.len() <= n {
            return allowed;
        }
        return allowed.choose_multiple(rng, n).copied().collect();
    }
    let mut chosen = Vec::with_capacity(n);
    let mut seen = HashSet::with_capacity(n);
    while chosen.len() < n {
        let j = rng.random_range(0..num_items);
        if known.binary_search(&j).is_err() && seen.insert(j) {
            chosen.push(j);
        }
    }
    chosen
}

/// Ranks each user's held-out `target` among its candidate set.
///
/// `known` holds every positive of every user; none of them is used as a
/// negative. Negatives are drawn from a per-user stream of `seed`, so the
/// result does not depend on evaluation order or thread count.
pub fn evaluate(
    scorer: &dyn Scorer,
    targets: &BTreeMap<usize, usize>,
    known: &Interactions,
    protocol: &RankingProtocol,
    seed: u64,
) -> RankingReport {
    let num_items = scorer.num_items();
    let targets: Vec<(usize, usize)> = targets.iter().map(|(&u, &j)| (u, j)).collect();
    let outcomes: Vec<(usize, Option<usize>)> = targets
        .par_iter()
        .map(|&(user, target)| {
            let mut known_items = known.items_of(user).to_vec();
            if !known_items.contains(&target) {
                known_items.push(target);
            }
            known_items.sort_unstable();
            let negatives = match protocol.candidate_mode {
                CandidateMode::Sampled => {
                    let mut rng = user_rng(seed, user);
                    sample_uniform_negatives(
                        num_items,
                        &known_items,
                        protocol.num_sampled_negatives,
                        &mut rng,
                    )
                }
                CandidateMode::AllItems => (0..num_items)
                    .filter(|j| known_items.binary_search(j).is_err())
                    .collect(),
            };
            if negatives.is_empty() {
                return (user, None);
            }
            let mut candidates = Vec::with_capacity(negatives.len() + 1);
            candidates.push(target);
            candidates.extend(negatives);
            let scores = scorer.score_items(user, &candidates);
            (user, Some(rank_of(target, scores[0], &candidates, &scores)))
        })
        .collect();

    let mut per_user = Vec::with_capacity(outcomes.len());
    let mut skipped = Vec::new();
    for (user, rank) in outcomes {
        match rank {
            Some(rank) => per_user.push((user, rank)),
            None => skipped.push(user),
        }
    }
    let cutoff = protocol.cutoff;
    let n = per_user.len().max(1) as f64;
    let hits = per_user.iter().filter(|(_, r)| *r <= cutoff).count();
    let ndcg: f64 = per_user.iter().map(|(_, r)| ndcg_contribution(*r, cutoff)).sum();
    RankingReport {
        per_user,
        skipped,
        cutoff,
        hr_at_k: hits as f64 / n,
        ndcg_at_k: ndcg / n,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopK {
    pub items: Vec<usize>,
    pub scores: Vec<f64>,
    /// Fewer than `k` candidates existed.
    pub short: bool,
}

/// Descending score, ascending index on ties.
pub fn ranking_order(a: (usize, f64), b: (usize, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
}

/// Picks the `k` best of `scored` in ranking order.
pub fn top_k_of(mut scored: Vec<(usize, f64)>, k: usize) -> Vec<(usize, f64)> {
    if scored.len() > k {
        scored.select_nth_unstable_by(k - 1, |a, b| ranking_order(*a, *b));
        scored.truncate(k);
    }
    scored.sort_by(|a, b| ranking_order(*a, *b));
    scored
}

/// The `k` best items the user has not consumed in `train`.
pub fn top_k_recommendations(
    scorer: &dyn Scorer,
    user: usize,
    train: &Interactions,
    k: usize,
) -> TopK {
    assert!(k >= 1, "k must be at least 1");
    let mut consumed = train.items_of(user).to_vec();
    consumed.sort_unstable();
    let scores = scorer.score_all(user);
    let scored: Vec<(usize, f64)> = scores
        .into_iter()
        .enumerate()
        .filter(|(j, _)| consumed.binary_search(j).is_err())
        .collect();
    let short = scored.len() < k;
    let best = top_k_of(scored, k);
    TopK {
        items: best.iter().map(|p| p.0).collect(),
        scores: best.iter().map(|p| p.1).collect(),
        short,
    }
}
