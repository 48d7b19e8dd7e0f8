//! Shared oracles and fixtures for the integration suites.
//!
//! Everything here recomputes expected values by routes independent of the
//! implementation under test: brute-force enumeration for query answers,
//! materialize-then-fold intersections for the type graph, and direct
//! transcriptions of the ranking formulas.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use temp_cqa::kg::{
    load_kg, load_splits, EntityId, KnowledgeGraph, RelationId, SplitGraphs, TypeId, UNKNOWN_TYPE,
};
use temp_cqa::query::Structure;

// ---------------------------------------------------------------------------
// fixtures
// ---------------------------------------------------------------------------

/// Write TSV content and load a single graph.
pub fn kg_from(dir: &Path, triples: &str, types: &str) -> KnowledgeGraph {
    let t = dir.join("t.tsv");
    let ty = dir.join("ty.tsv");
    std::fs::write(&t, triples).unwrap();
    std::fs::write(&ty, types).unwrap();
    load_kg(&t, &ty).unwrap()
}

/// Write four split files and load them.
pub fn splits_from(dir: &Path, train: &str, valid: &str, test: &str, types: &str) -> SplitGraphs {
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(dir.join("valid.tsv"), valid).unwrap();
    std::fs::write(dir.join("test.tsv"), test).unwrap();
    std::fs::write(dir.join("types.tsv"), types).unwrap();
    load_splits(dir).unwrap()
}

/// Random KG as TSV strings: up to `max_assertions` triples over
/// `n_entities`/`n_relations`, and up to two type assertions per entity over
/// `n_types` type names.
pub fn random_kg_tsv(
    seed: u64,
    n_entities: usize,
    n_relations: usize,
    n_types: usize,
    max_assertions: usize,
) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triples = String::new();
    for _ in 0..max_assertions {
        let h = rng.random_range(0..n_entities);
        let r = rng.random_range(0..n_relations);
        let t = rng.random_range(0..n_entities);
        triples.push_str(&format!("n{h}\tr{r}\tn{t}\n"));
    }
    let mut types = String::new();
    for e in 0..n_entities {
        for _ in 0..rng.random_range(0..3usize) {
            let c = rng.random_range(0..n_types);
            types.push_str(&format!("n{e}\tc{c}\n"));
        }
    }
    (triples, types)
}

/// Deterministic typed toy graph: `n` entities cycling through 4 types, and
/// 3 chain relations hopping t0->t1->t2->t3 between type classes, so one- to
/// three-hop chains and shared-tail intersections all exist.
pub fn toy_typed_kg_tsv(n: usize, seed: u64) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ty = |i: usize| i % 4;
    let mut triples = String::new();
    for rel in 0..3usize {
        for a in 0..n {
            if ty(a) != rel {
                continue;
            }
            for b in 0..n {
                if ty(b) != rel + 1 {
                    continue;
                }
                if rng.random_range(0.0..1.0) < 0.45 {
                    triples.push_str(&format!("e{a}\tr{rel}\te{b}\n"));
                }
            }
        }
    }
    let mut types = String::new();
    for i in 0..n {
        types.push_str(&format!("e{i}\tt{}\n", ty(i)));
    }
    (triples, types)
}

/// Inductive toy split: the training graph from [`toy_typed_kg_tsv`], plus
/// test-only edges among fresh entities that share the four types but touch
/// no training edge.
pub fn toy_inductive_splits(dir: &Path, n_train: usize, seed: u64) -> SplitGraphs {
    let (train, mut types) = toy_typed_kg_tsv(n_train, seed);
    let mut test = String::new();
    // unseen x0..x4 typed like the training classes, wired into short chains
    for (i, t) in [(0usize, 0usize), (1, 1), (2, 2), (3, 3), (4, 0)] {
        types.push_str(&format!("x{i}\tt{t}\n"));
    }
    test.push_str("x0\tr0\tx1\n");
    test.push_str("x4\tr0\tx1\n");
    test.push_str("x1\tr1\tx2\n");
    test.push_str("x2\tr2\tx3\n");
    splits_from(dir, &train, "", &test, &types)
}

// ---------------------------------------------------------------------------
// query oracle: brute-force enumeration over all variable assignments
// ---------------------------------------------------------------------------

fn edge(kg: &KnowledgeGraph, h: EntityId, r: RelationId, t: EntityId) -> bool {
    kg.relation_assertions().contains(&(h, r, t))
}

/// Exact answers by enumerating every entity assignment to every variable
/// node of the structure, checking edges directly against the assertion set.
pub fn brute_force_answers(
    kg: &KnowledgeGraph,
    structure: Structure,
    anchors: &[EntityId],
    relations: &[RelationId],
) -> BTreeSet<EntityId> {
    let all: Vec<EntityId> = (0..kg.entity_count()).map(EntityId).collect();
    let a = anchors;
    let r = relations;
    let mut answers = BTreeSet::new();
    for &y in &all {
        let holds = match structure {
            Structure::OneP => edge(kg, a[0], r[0], y),
            Structure::TwoP => all
                .iter()
                .any(|&v| edge(kg, a[0], r[0], v) && edge(kg, v, r[1], y)),
            Structure::ThreeP => all.iter().any(|&v1| {
                edge(kg, a[0], r[0], v1)
                    && all
                        .iter()
                        .any(|&v2| edge(kg, v1, r[1], v2) && edge(kg, v2, r[2], y))
            }),
            Structure::TwoI => edge(kg, a[0], r[0], y) && edge(kg, a[1], r[1], y),
            Structure::ThreeI => {
                edge(kg, a[0], r[0], y) && edge(kg, a[1], r[1], y) && edge(kg, a[2], r[2], y)
            }
            Structure::Pi => {
                all.iter()
                    .any(|&v| edge(kg, a[0], r[0], v) && edge(kg, v, r[1], y))
                    && edge(kg, a[1], r[2], y)
            }
            Structure::Ip => all.iter().any(|&m| {
                edge(kg, a[0], r[0], m) && edge(kg, a[1], r[1], m) && edge(kg, m, r[2], y)
            }),
            Structure::TwoU => edge(kg, a[0], r[0], y) || edge(kg, a[1], r[1], y),
            Structure::Up => all.iter().any(|&m| {
                (edge(kg, a[0], r[0], m) || edge(kg, a[1], r[1], m)) && edge(kg, m, r[2], y)
            }),
        };
        if holds {
            answers.insert(y);
        }
    }
    answers
}

// ---------------------------------------------------------------------------
// type-graph oracle: materialize every per-assertion type set, fold pairwise
// ---------------------------------------------------------------------------

pub struct NaiveRelationTypes {
    pub head: BTreeSet<TypeId>,
    pub tail: BTreeSet<TypeId>,
    pub all: Vec<TypeId>,
}

fn tp_set(kg: &KnowledgeGraph, e: EntityId) -> BTreeSet<TypeId> {
    let ts = kg.entity_types(e).unwrap();
    if ts.is_empty() {
        BTreeSet::from([UNKNOWN_TYPE])
    } else {
        ts.iter().copied().collect()
    }
}

/// Per-relation type sets by materializing the per-assertion sets first and
/// folding intersections pairwise over the list.
pub fn naive_relation_types(kg: &KnowledgeGraph, r: RelationId) -> Option<NaiveRelationTypes> {
    let head_sets: Vec<BTreeSet<TypeId>> = kg
        .relation_assertions()
        .iter()
        .filter(|(_, rel, _)| *rel == r)
        .map(|&(h, _, _)| tp_set(kg, h))
        .collect();
    let tail_sets: Vec<BTreeSet<TypeId>> = kg
        .relation_assertions()
        .iter()
        .filter(|(_, rel, _)| *rel == r)
        .map(|&(_, _, t)| tp_set(kg, t))
        .collect();
    if head_sets.is_empty() {
        return None;
    }
    let fold = |sets: &[BTreeSet<TypeId>]| -> BTreeSet<TypeId> {
        let mut acc = sets[0].clone();
        for s in &sets[1..] {
            acc = acc.intersection(s).copied().collect();
        }
        if acc.is_empty() {
            acc.insert(UNKNOWN_TYPE);
        }
        acc
    };
    let head = fold(&head_sets);
    let tail = fold(&tail_sets);
    let all = head.union(&tail).copied().collect();
    Some(NaiveRelationTypes { head, tail, all })
}

// ---------------------------------------------------------------------------
// metric oracle: direct transcription of the ranking formulas
// ---------------------------------------------------------------------------

/// `MRR = mean over queries of (1/|A_q|) * sum over answers of 1/Rank(v)`.
pub fn mrr_direct(ranks_per_query: &[Vec<usize>]) -> f64 {
    let mut total = 0.0;
    for ranks in ranks_per_query {
        let mut acc = 0.0;
        for &rank in ranks {
            acc += 1.0 / rank as f64;
        }
        total += acc / ranks.len() as f64;
    }
    total / ranks_per_query.len() as f64
}

/// `Hits@K = mean over queries of (1/|A_q|) * sum of [Rank(v) <= K]`.
pub fn hits_direct(ranks_per_query: &[Vec<usize>], k: usize) -> f64 {
    let mut total = 0.0;
    for ranks in ranks_per_query {
        let mut acc = 0.0;
        for &rank in ranks {
            acc += if rank <= k { 1.0 } else { 0.0 };
        }
        total += acc / ranks.len() as f64;
    }
    total / ranks_per_query.len() as f64
}
