//! Query sampling by reverse random walks from answer entities.
//!
//! Walking backwards from a uniformly chosen answer guarantees every emitted
//! query has at least one answer on the sampled graph.

use std::collections::BTreeSet;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::kg::{EntityId, KnowledgeGraph, RelationId, SplitGraphs, Triple};

use super::{
    answer_query, QueryDag, QueryError, QueryInstance, QueryResult, QuerySet, Regime, Structure,
};

const RETRY_BUDGET: usize = 10_000;

/// Generate evaluation queries for a regime, sampled on the full test graph.
///
/// Generalization keeps only queries with at least one answer that is
/// unreachable on the training graph; inductive keeps only queries touching
/// at least one entity with no training edge.
pub fn generate_queries(
    splits: &SplitGraphs,
    structure: Structure,
    count: usize,
    regime: Regime,
    seed: u64,
) -> QueryResult<QuerySet> {
    let train_entities = splits.train.edge_entities();
    generate_on(
        &splits.test,
        structure,
        count,
        regime,
        seed,
        |dag, answers| match regime {
            Regime::Deductive => true,
            Regime::Generalization => {
                let easy = answer_query(&splits.train, dag).expect("shared vocabulary");
                answers.difference(&easy).next().is_some()
            }
            Regime::Inductive => {
                dag.anchors().iter().any(|a| !train_entities.contains(a))
                    || answers.iter().any(|a| !train_entities.contains(a))
            }
        },
    )
}

/// Generate training queries for a regime: deductive trains on the full
/// graph, the other regimes on the training graph.
pub fn generate_training_queries(
    splits: &SplitGraphs,
    structure: Structure,
    count: usize,
    regime: Regime,
    seed: u64,
) -> QueryResult<QuerySet> {
    let graph = match regime {
        Regime::Deductive => &splits.test,
        Regime::Generalization | Regime::Inductive => &splits.train,
    };
    generate_on(graph, structure, count, regime, seed, |_, _| true)
}

fn generate_on(
    kg: &KnowledgeGraph,
    structure: Structure,
    count: usize,
    regime: Regime,
    seed: u64,
    keep: impl Fn(&QueryDag, &BTreeSet<EntityId>) -> bool,
) -> QueryResult<QuerySet> {
    if count == 0 {
        return Err(QueryError::ZeroCount);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let answer_pool = kg.entities_with_in_edges();
    let edges: Vec<Triple> = kg.relation_assertions().iter().copied().collect();

    let mut set = QuerySet::new(regime);
    for _ in 0..count {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > RETRY_BUDGET {
                return Err(QueryError::GenerationExhausted {
                    structure,
                    attempts: RETRY_BUDGET,
                });
            }
            let Some((anchors, relations)) = sample(kg, structure, &answer_pool, &edges, &mut rng)
            else {
                continue;
            };
            let dag = QueryDag::from_parts(structure, anchors, relations)?;
            let answers = answer_query(kg, &dag)?;
            debug_assert!(!answers.is_empty(), "reverse walk yields an answer");
            if keep(&dag, &answers) {
                set.queries.push(QueryInstance { dag, answers });
                break;
            }
        }
    }
    Ok(set)
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, items: &'a [T]) -> Option<&'a T> {
    if items.is_empty() {
        None
    } else {
        Some(&items[rng.random_range(0..items.len())])
    }
}

/// One reverse walk matching the structure pattern; `None` when the walk
/// dead-ends and the caller should retry.
fn sample(
    kg: &KnowledgeGraph,
    structure: Structure,
    answer_pool: &[EntityId],
    edges: &[Triple],
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<EntityId>, Vec<RelationId>)> {
    let y = *pick(rng, answer_pool)?;
    match structure {
        Structure::OneP => {
            let &(a, r) = pick(rng, kg.in_edges(y))?;
            Some((vec![a], vec![r]))
        }
        Structure::TwoP => {
            let &(v, r2) = pick(rng, kg.in_edges(y))?;
            let &(a, r1) = pick(rng, kg.in_edges(v))?;
            Some((vec![a], vec![r1, r2]))
        }
        Structure::ThreeP => {
            let &(v2, r3) = pick(rng, kg.in_edges(y))?;
            let &(v1, r2) = pick(rng, kg.in_edges(v2))?;
            let &(a, r1) = pick(rng, kg.in_edges(v1))?;
            Some((vec![a], vec![r1, r2, r3]))
        }
        Structure::TwoI => {
            let &(a1, r1) = pick(rng, kg.in_edges(y))?;
            let &(a2, r2) = pick(rng, kg.in_edges(y))?;
            Some((vec![a1, a2], vec![r1, r2]))
        }
        Structure::ThreeI => {
            let &(a1, r1) = pick(rng, kg.in_edges(y))?;
            let &(a2, r2) = pick(rng, kg.in_edges(y))?;
            let &(a3, r3) = pick(rng, kg.in_edges(y))?;
            Some((vec![a1, a2, a3], vec![r1, r2, r3]))
        }
        Structure::Pi => {
            let &(v, r2) = pick(rng, kg.in_edges(y))?;
            let &(a1, r1) = pick(rng, kg.in_edges(v))?;
            let &(a2, r3) = pick(rng, kg.in_edges(y))?;
            Some((vec![a1, a2], vec![r1, r2, r3]))
        }
        Structure::Ip => {
            let &(m, r3) = pick(rng, kg.in_edges(y))?;
            let &(a1, r1) = pick(rng, kg.in_edges(m))?;
            let &(a2, r2) = pick(rng, kg.in_edges(m))?;
            Some((vec![a1, a2], vec![r1, r2, r3]))
        }
        Structure::TwoU => {
            let &(a1, r1) = pick(rng, kg.in_edges(y))?;
            // the second disjunct may be any edge; the first already
            // guarantees an answer
            let &(a2, r2, _) = pick(rng, edges)?;
            Some((vec![a1, a2], vec![r1, r2]))
        }
        Structure::Up => {
            let &(m, r3) = pick(rng, kg.in_edges(y))?;
            let &(a1, r1) = pick(rng, kg.in_edges(m))?;
            let &(a2, r2, _) = pick(rng, edges)?;
            Some((vec![a1, a2], vec![r1, r2, r3]))
        }
    }
}
