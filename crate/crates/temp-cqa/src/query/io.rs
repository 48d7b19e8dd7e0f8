//! JSON-lines persistence for query sets.
//!
//! One query per line:
//! `{"structure":"2p","anchors":[0],"relations":[1,2],"answers":[3],"regime":"deductive"}`

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, RelationId};

use super::{QueryDag, QueryError, QueryInstance, QueryResult, QuerySet, Regime, Structure};

#[derive(Serialize, Deserialize)]
struct QueryLine {
    structure: Structure,
    anchors: Vec<usize>,
    relations: Vec<usize>,
    answers: Vec<usize>,
    regime: Regime,
}

/// Write a query set as JSON lines; the inverse of [`load_queries`].
pub fn serialize_queries(qs: &QuerySet, path: &Path) -> QueryResult<()> {
    let mut out = String::new();
    for q in &qs.queries {
        let line = QueryLine {
            structure: q.dag.structure(),
            anchors: q.dag.anchors().iter().map(|e| e.0).collect(),
            relations: q.dag.relations().iter().map(|r| r.0).collect(),
            answers: q.answers.iter().map(|e| e.0).collect(),
            regime: qs.regime,
        };
        out.push_str(&serde_json::to_string(&line).expect("query line serializes"));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| QueryError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

/// Load a query set written by [`serialize_queries`]. An empty file loads to
/// an empty set.
pub fn load_queries(path: &Path) -> QueryResult<QuerySet> {
    let text = fs::read_to_string(path).map_err(|e| QueryError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut set: Option<QuerySet> = None;
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let parse_err = |reason: String| QueryError::ParseLine {
            path: path.to_path_buf(),
            line: lineno,
            reason,
        };
        let line: QueryLine = serde_json::from_str(raw).map_err(|e| parse_err(e.to_string()))?;
        if line.answers.is_empty() {
            return Err(parse_err("empty answer set".to_string()));
        }
        let dag = QueryDag::from_parts(
            line.structure,
            line.anchors.into_iter().map(EntityId).collect(),
            line.relations.into_iter().map(RelationId).collect(),
        )
        .map_err(|e| parse_err(e.to_string()))?;
        let answers: BTreeSet<EntityId> = line.answers.into_iter().map(EntityId).collect();

        let set = set.get_or_insert_with(|| QuerySet::new(line.regime));
        if set.regime != line.regime {
            return Err(parse_err(format!(
                "regime `{}` conflicts with `{}` from earlier lines",
                line.regime, set.regime
            )));
        }
        set.queries.push(QueryInstance { dag, answers });
    }
    Ok(set.unwrap_or_default())
}

impl Default for QuerySet {
    fn default() -> Self {
        QuerySet::new(Regime::default())
    }
}
