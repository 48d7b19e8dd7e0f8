//! Positive first-order query structures, exact answering, generation, and
//! JSONL persistence.
//!
//! The nine supported shapes combine relation projections (`p`),
//! intersections (`i`), and unions (`u`) into a rooted DAG evaluated from
//! anchor entities to one target variable.

mod answer;
mod generate;
mod io;

pub use answer::answer_query;
pub use generate::{generate_queries, generate_training_queries};
pub use io::{load_queries, serialize_queries};

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("structure {structure} takes {expected_anchors} anchors and {expected_relations} relations, got {got_anchors} and {got_relations}")]
    Arity {
        structure: Structure,
        expected_anchors: usize,
        expected_relations: usize,
        got_anchors: usize,
        got_relations: usize,
    },

    #[error("anchor entity id {0} is not in the graph")]
    AnchorNotInGraph(usize),

    #[error("relation id {0} is not in the graph")]
    RelationNotInGraph(usize),

    #[error("query count must be positive")]
    ZeroCount,

    #[error("gave up generating a {structure} query after {attempts} attempts")]
    GenerationExhausted {
        structure: Structure,
        attempts: usize,
    },

    #[error("{path}:{line}: {reason}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("unknown query structure `{0}`")]
    UnknownStructure(String),
}

pub type QueryResult<T> = Result<T, QueryError>;

/// The nine positive query shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Structure {
    #[serde(rename = "1p")]
    OneP,
    #[serde(rename = "2p")]
    TwoP,
    #[serde(rename = "3p")]
    ThreeP,
    #[serde(rename = "2i")]
    TwoI,
    #[serde(rename = "3i")]
    ThreeI,
    #[serde(rename = "pi")]
    Pi,
    #[serde(rename = "ip")]
    Ip,
    #[serde(rename = "2u")]
    TwoU,
    #[serde(rename = "up")]
    Up,
}

impl Structure {
    pub const ALL: [Structure; 9] = [
        Structure::OneP,
        Structure::TwoP,
        Structure::ThreeP,
        Structure::TwoI,
        Structure::ThreeI,
        Structure::Pi,
        Structure::Ip,
        Structure::TwoU,
        Structure::Up,
    ];

    /// Structures sampled during training; the remaining four are only seen
    /// at evaluation time.
    pub const TRAINING: [Structure; 5] = [
        Structure::OneP,
        Structure::TwoP,
        Structure::ThreeP,
        Structure::TwoI,
        Structure::ThreeI,
    ];

    pub fn tag(&self) -> &'static str {
        match self {
            Structure::OneP => "1p",
            Structure::TwoP => "2p",
            Structure::ThreeP => "3p",
            Structure::TwoI => "2i",
            Structure::ThreeI => "3i",
            Structure::Pi => "pi",
            Structure::Ip => "ip",
            Structure::TwoU => "2u",
            Structure::Up => "up",
        }
    }

    /// `(anchors, relations)` the structure consumes.
    pub fn arity(&self) -> (usize, usize) {
        match self {
            Structure::OneP => (1, 1),
            Structure::TwoP => (1, 2),
            Structure::ThreeP => (1, 3),
            Structure::TwoI => (2, 2),
            Structure::ThreeI => (3, 3),
            Structure::Pi => (2, 3),
            Structure::Ip => (2, 3),
            Structure::TwoU => (2, 2),
            Structure::Up => (2, 3),
        }
    }
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Structure {
    type Err = QueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Structure::ALL
            .iter()
            .find(|st| st.tag() == s)
            .copied()
            .ok_or_else(|| QueryError::UnknownStructure(s.to_string()))
    }
}

/// One node of a query DAG. Anchors carry concrete entities; operator nodes
/// combine their children bottom-up toward the single root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QueryNode {
    Anchor(EntityId),
    Project {
        input: Box<QueryNode>,
        relation: RelationId,
    },
    Intersect(Vec<QueryNode>),
    Union(Vec<QueryNode>),
}

impl QueryNode {
    fn project(self, relation: RelationId) -> QueryNode {
        QueryNode::Project {
            input: Box::new(self),
            relation,
        }
    }
}

/// A rooted query DAG with its structure tag. Built only through
/// [`QueryDag::from_parts`], so the tag always matches the topology.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryDag {
    structure: Structure,
    anchors: Vec<EntityId>,
    relations: Vec<RelationId>,
    root: QueryNode,
}

impl QueryDag {
    /// Assemble the canonical topology of `structure` from anchors and
    /// relations, in structure order.
    pub fn from_parts(
        structure: Structure,
        anchors: Vec<EntityId>,
        relations: Vec<RelationId>,
    ) -> QueryResult<Self> {
        let (na, nr) = structure.arity();
        if anchors.len() != na || relations.len() != nr {
            return Err(QueryError::Arity {
                structure,
                expected_anchors: na,
                expected_relations: nr,
                got_anchors: anchors.len(),
                got_relations: relations.len(),
            });
        }
        let a = &anchors;
        let r = &relations;
        let root = match structure {
            Structure::OneP => QueryNode::Anchor(a[0]).project(r[0]),
            Structure::TwoP => QueryNode::Anchor(a[0]).project(r[0]).project(r[1]),
            Structure::ThreeP => QueryNode::Anchor(a[0])
                .project(r[0])
                .project(r[1])
                .project(r[2]),
            Structure::TwoI => QueryNode::Intersect(vec![
                QueryNode::Anchor(a[0]).project(r[0]),
                QueryNode::Anchor(a[1]).project(r[1]),
            ]),
            Structure::ThreeI => QueryNode::Intersect(vec![
                QueryNode::Anchor(a[0]).project(r[0]),
                QueryNode::Anchor(a[1]).project(r[1]),
                QueryNode::Anchor(a[2]).project(r[2]),
            ]),
            // two-hop chain intersected with a one-hop branch
            Structure::Pi => QueryNode::Intersect(vec![
                QueryNode::Anchor(a[0]).project(r[0]).project(r[1]),
                QueryNode::Anchor(a[1]).project(r[2]),
            ]),
            // intersection projected one further hop
            Structure::Ip => QueryNode::Intersect(vec![
                QueryNode::Anchor(a[0]).project(r[0]),
                QueryNode::Anchor(a[1]).project(r[1]),
            ])
            .project(r[2]),
            Structure::TwoU => QueryNode::Union(vec![
                QueryNode::Anchor(a[0]).project(r[0]),
                QueryNode::Anchor(a[1]).project(r[1]),
            ]),
            // union projected one further hop
            Structure::Up => QueryNode::Union(vec![
                QueryNode::Anchor(a[0]).project(r[0]),
                QueryNode::Anchor(a[1]).project(r[1]),
            ])
            .project(r[2]),
        };
        Ok(QueryDag {
            structure,
            anchors,
            relations,
            root,
        })
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn anchors(&self) -> &[EntityId] {
        &self.anchors
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.relations
    }

    pub fn root(&self) -> &QueryNode {
        &self.root
    }

    /// Union-free branches of the query, per disjunct. Union-free queries
    /// have exactly one branch; `2u`/`up` have one per disjunct.
    pub fn dnf_branches(&self) -> Vec<QueryDag> {
        match self.structure {
            Structure::TwoU => vec![
                QueryDag::from_parts(
                    Structure::OneP,
                    vec![self.anchors[0]],
                    vec![self.relations[0]],
                )
                .unwrap(),
                QueryDag::from_parts(
                    Structure::OneP,
                    vec![self.anchors[1]],
                    vec![self.relations[1]],
                )
                .unwrap(),
            ],
            Structure::Up => vec![
                QueryDag::from_parts(
                    Structure::TwoP,
                    vec![self.anchors[0]],
                    vec![self.relations[0], self.relations[2]],
                )
                .unwrap(),
                QueryDag::from_parts(
                    Structure::TwoP,
                    vec![self.anchors[1]],
                    vec![self.relations[1], self.relations[2]],
                )
                .unwrap(),
            ],
            _ => vec![self.clone()],
        }
    }
}

/// Which evaluation protocol a query set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Generalization,
    #[default]
    Deductive,
    Inductive,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Regime::Generalization => "generalization",
            Regime::Deductive => "deductive",
            Regime::Inductive => "inductive",
        };
        f.write_str(s)
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generalization" => Ok(Regime::Generalization),
            "deductive" => Ok(Regime::Deductive),
            "inductive" => Ok(Regime::Inductive),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// A query with its exact answers on a designated graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryInstance {
    pub dag: QueryDag,
    pub answers: BTreeSet<EntityId>,
}

/// Queries plus answers under one regime.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuerySet {
    pub regime: Regime,
    pub queries: Vec<QueryInstance>,
}

impl QuerySet {
    pub fn new(regime: Regime) -> Self {
        QuerySet {
            regime,
            queries: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    /// Query counts per structure.
    pub fn counts(&self) -> std::collections::BTreeMap<Structure, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for q in &self.queries {
            *counts.entry(q.dag.structure()).or_insert(0) += 1;
        }
        counts
    }
}
