//! Exact query answering by bottom-up set evaluation.

use std::collections::BTreeSet;

use crate::kg::{EntityId, KnowledgeGraph};

use super::{QueryDag, QueryError, QueryNode, QueryResult};

/// Exact answers of a positive query on a graph: projection maps a set `S`
/// to every tail reachable from `S` over the edge relation; intersection and
/// union are plain set operations; the answer is the set at the root.
pub fn answer_query(kg: &KnowledgeGraph, q: &QueryDag) -> QueryResult<BTreeSet<EntityId>> {
    for &a in q.anchors() {
        if !kg.contains_entity(a) {
            return Err(QueryError::AnchorNotInGraph(a.0));
        }
    }
    for &r in q.relations() {
        if !kg.contains_relation(r) {
            return Err(QueryError::RelationNotInGraph(r.0));
        }
    }
    Ok(eval(kg, q.root()))
}

fn eval(kg: &KnowledgeGraph, node: &QueryNode) -> BTreeSet<EntityId> {
    match node {
        QueryNode::Anchor(e) => BTreeSet::from([*e]),
        QueryNode::Project { input, relation } => {
            let sources = eval(kg, input);
            let mut out = BTreeSet::new();
            for s in sources {
                out.extend(kg.tails(s, *relation).iter().copied());
            }
            out
        }
        QueryNode::Intersect(children) => {
            let mut sets = children.iter().map(|c| eval(kg, c));
            let first = sets.next().unwrap_or_default();
            sets.fold(first, |acc, s| acc.intersection(&s).copied().collect())
        }
        QueryNode::Union(children) => {
            let mut out = BTreeSet::new();
            for c in children {
                out.extend(eval(kg, c));
            }
            out
        }
    }
}
