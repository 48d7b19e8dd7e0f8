//! Filtered ranking and the MRR / Hits@K metrics.

use std::collections::BTreeSet;

use crate::kg::EntityId;
use crate::Real;

use super::EvalError;

/// Filtered rank of each target answer given per-entity scores (indexed by
/// entity id).
///
/// A target is ranked only against non-answers: other true answers never
/// hurt it. Non-answers scoring strictly higher count in full; exact ties
/// count half, rounded up, which sits midway between the optimistic and
/// pessimistic tie orders.
pub fn ranks_from_scores(
    scores: &[Real],
    answers: &BTreeSet<EntityId>,
    targets: &BTreeSet<EntityId>,
) -> Vec<usize> {
    debug_assert!(targets.is_subset(answers));
    targets
        .iter()
        .map(|v| {
            let sv = scores[v.0];
            let mut strictly = 0usize;
            let mut ties = 0usize;
            for (i, &s) in scores.iter().enumerate() {
                if answers.contains(&EntityId(i)) {
                    continue;
                }
                if s > sv {
                    strictly += 1;
                } else if s == sv {
                    ties += 1;
                }
            }
            1 + strictly + ties.div_ceil(2)
        })
        .collect()
}

/// Mean reciprocal rank: the reciprocal ranks are averaged per query, then
/// across queries.
pub fn mrr(ranks_per_query: &[Vec<usize>]) -> Result<Real, EvalError> {
    per_query_mean(ranks_per_query, |rank| 1.0 / rank as Real)
}

/// Hits@K: the fraction of answers ranked at or above `k`, averaged per
/// query, then across queries.
pub fn hits_at_k(ranks_per_query: &[Vec<usize>], k: usize) -> Result<Real, EvalError> {
    per_query_mean(ranks_per_query, |rank| if rank <= k { 1.0 } else { 0.0 })
}

fn per_query_mean(
    ranks_per_query: &[Vec<usize>],
    f: impl Fn(usize) -> Real,
) -> Result<Real, EvalError> {
    if ranks_per_query.is_empty() || ranks_per_query.iter().any(|r| r.is_empty()) {
        return Err(EvalError::EmptyQuerySet);
    }
    let total: Real = ranks_per_query
        .iter()
        .map(|ranks| ranks.iter().map(|&r| f(r)).sum::<Real>() / ranks.len() as Real)
        .sum();
    Ok(total / ranks_per_query.len() as Real)
}
