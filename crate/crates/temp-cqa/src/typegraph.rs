//! Relation type graph: types as nodes, relations as edges.
//!
//! A relation's head (tail) type set is the intersection of the head (tail)
//! entities' type sets across every assertion the relation occurs in. An
//! entity without type assertions contributes `{UNKNOWN}`, and an empty
//! intersection falls back to `{UNKNOWN}`, so every relation ends up with at
//! least one type.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{KnowledgeGraph, RelationId, TypeId, UNKNOWN_TYPE};

#[derive(Debug, Error)]
pub enum TypeGraphError {
    #[error("relation id {0} has no type information")]
    UnknownRelation(usize),
}

/// Per-relation derived type sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationTypes {
    pub head: BTreeSet<TypeId>,
    pub tail: BTreeSet<TypeId>,
    /// head ∪ tail, ascending by id; position fixes the linear order used by
    /// attention aggregation.
    pub all: Vec<TypeId>,
}

/// The derived type graph over a knowledge graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeGraph {
    nodes: BTreeSet<TypeId>,
    relations: BTreeMap<RelationId, RelationTypes>,
    /// Set-valued labeled edges, one per distinct
    /// `(head type set, relation, tail type set)` among the assertions.
    labeled_edges: BTreeSet<(Vec<TypeId>, RelationId, Vec<TypeId>)>,
}

impl TypeGraph {
    pub fn nodes(&self) -> &BTreeSet<TypeId> {
        &self.nodes
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.relations.keys().copied()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn labeled_edges(&self) -> &BTreeSet<(Vec<TypeId>, RelationId, Vec<TypeId>)> {
        &self.labeled_edges
    }

    pub fn relation_types(&self, r: RelationId) -> Result<&RelationTypes, TypeGraphError> {
        self.relations
            .get(&r)
            .ok_or(TypeGraphError::UnknownRelation(r.0))
    }

    pub fn head_types(&self, r: RelationId) -> Result<&BTreeSet<TypeId>, TypeGraphError> {
        Ok(&self.relation_types(r)?.head)
    }

    pub fn tail_types(&self, r: RelationId) -> Result<&BTreeSet<TypeId>, TypeGraphError> {
        Ok(&self.relation_types(r)?.tail)
    }

    /// All types associated with a relation, ascending by id.
    pub fn relation_type_list(&self, r: RelationId) -> Result<&[TypeId], TypeGraphError> {
        Ok(&self.relation_types(r)?.all)
    }

    /// Like [`TypeGraph::relation_type_list`], but relations absent from the
    /// graph (e.g. seen only in held-out splits) resolve to `[UNKNOWN]`.
    pub fn type_list_or_unknown(&self, r: RelationId) -> Vec<TypeId> {
        self.relations
            .get(&r)
            .map(|rt| rt.all.clone())
            .unwrap_or_else(|| vec![UNKNOWN_TYPE])
    }

    /// JSON export: `{nodes: [...], edges: [{relation, head_types, tail_types}]}`.
    pub fn to_json(&self) -> String {
        let export = TypeGraphExport {
            nodes: self.nodes.iter().map(|t| t.0).collect(),
            edges: self
                .relations
                .iter()
                .map(|(r, rt)| TypeGraphEdge {
                    relation: r.0,
                    head_types: rt.head.iter().map(|t| t.0).collect(),
                    tail_types: rt.tail.iter().map(|t| t.0).collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&export).expect("type graph serializes")
    }

    /// DOT rendering with type names as nodes and one edge per relation
    /// between every head/tail type pair.
    pub fn to_dot(&self, kg: &KnowledgeGraph) -> String {
        let mut out = String::from("digraph type_graph {\n");
        for t in &self.nodes {
            let name = kg.types().name(t.0).unwrap_or("?");
            out.push_str(&format!("  t{} [label=\"{}\"];\n", t.0, name));
        }
        for (r, rt) in &self.relations {
            let label = kg.relations().name(r.0).unwrap_or("?");
            for h in &rt.head {
                for t in &rt.tail {
                    out.push_str(&format!("  t{} -> t{} [label=\"{}\"];\n", h.0, t.0, label));
                }
            }
        }
        out.push_str("}\n");
        out
    }
}

#[derive(Serialize, Deserialize)]
struct TypeGraphExport {
    nodes: Vec<usize>,
    edges: Vec<TypeGraphEdge>,
}

#[derive(Serialize, Deserialize)]
struct TypeGraphEdge {
    relation: usize,
    head_types: Vec<usize>,
    tail_types: Vec<usize>,
}

/// Type set of one entity as seen by intersections: `{UNKNOWN}` if untyped.
fn entity_type_set(kg: &KnowledgeGraph, e: crate::kg::EntityId) -> BTreeSet<TypeId> {
    let types = kg.entity_types(e).expect("assertion entity in vocabulary");
    if types.is_empty() {
        BTreeSet::from([UNKNOWN_TYPE])
    } else {
        types.iter().copied().collect()
    }
}

/// Derive the type graph of a knowledge graph.
pub fn build_type_graph(kg: &KnowledgeGraph) -> TypeGraph {
    let mut heads: BTreeMap<RelationId, BTreeSet<TypeId>> = BTreeMap::new();
    let mut tails: BTreeMap<RelationId, BTreeSet<TypeId>> = BTreeMap::new();
    let mut labeled_edges = BTreeSet::new();

    for &(h, r, t) in kg.relation_assertions() {
        let head_set = entity_type_set(kg, h);
        let tail_set = entity_type_set(kg, t);
        labeled_edges.insert((
            head_set.iter().copied().collect::<Vec<_>>(),
            r,
            tail_set.iter().copied().collect::<Vec<_>>(),
        ));
        heads
            .entry(r)
            .and_modify(|acc| *acc = acc.intersection(&head_set).copied().collect())
            .or_insert(head_set);
        tails
            .entry(r)
            .and_modify(|acc| *acc = acc.intersection(&tail_set).copied().collect())
            .or_insert(tail_set);
    }

    let mut nodes = BTreeSet::new();
    let mut relations = BTreeMap::new();
    for (r, mut head) in heads {
        let mut tail = tails.remove(&r).unwrap();
        if head.is_empty() {
            head.insert(UNKNOWN_TYPE);
        }
        if tail.is_empty() {
            tail.insert(UNKNOWN_TYPE);
        }
        let all: Vec<TypeId> = head.union(&tail).copied().collect();
        nodes.extend(all.iter().copied());
        relations.insert(r, RelationTypes { head, tail, all });
    }

    TypeGraph {
        nodes,
        relations,
        labeled_edges,
    }
}
