//! Ranking evaluation across regimes, and the report format.

mod metrics;

pub use metrics::{hits_at_k, mrr, ranks_from_scores};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::SplitGraphs;
use crate::qe::{
    all_entity_representations, embed_query, score_against, ModelConfig, ModelMeta, QeError,
    QueryModel,
};
use crate::query::{answer_query, QueryError, QuerySet, Regime, Structure};
use crate::train::training_graphs;
use crate::{ParameterStore, Real};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("metrics over an empty query set are undefined")]
    EmptyQuerySet,

    #[error("regime mismatch: evaluating {requested} against a checkpoint trained for {trained}")]
    RegimeMismatch { requested: Regime, trained: Regime },

    #[error("inductive evaluation needs an inductively trained, type-enhanced checkpoint")]
    NotInductiveModel,

    #[error(transparent)]
    Qe(#[from] QeError),

    #[error(transparent)]
    Query(#[from] QueryError),

    #[error("{path}: {reason}")]
    Report { path: PathBuf, reason: String },
}

pub type EvalResult<T> = Result<T, EvalError>;

/// Metrics of one query structure.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct StructureMetrics {
    pub mrr: Real,
    pub hits1: Real,
    pub hits3: Real,
    pub hits10: Real,
    pub queries: usize,
}

/// Evaluation results: per-structure metrics plus their unweighted average.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub regime: Regime,
    pub model: ModelConfig,
    pub per_structure: BTreeMap<Structure, StructureMetrics>,
    pub average: StructureMetrics,
}

impl EvalReport {
    /// Aligned text table, one row per structure plus the average.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<6} {:>8} {:>8} {:>8} {:>8} {:>8}\n",
            "query", "MRR", "H@1", "H@3", "H@10", "n"
        ));
        let row = |name: &str, m: &StructureMetrics| {
            format!(
                "{:<6} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8}\n",
                name, m.mrr, m.hits1, m.hits3, m.hits10, m.queries
            )
        };
        for (s, m) in &self.per_structure {
            out.push_str(&row(s.tag(), m));
        }
        out.push_str(&row("avg", &self.average));
        out
    }

    pub fn save(&self, path: &Path) -> EvalResult<()> {
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, json).map_err(|e| EvalError::Report {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> EvalResult<Self> {
        let json = fs::read_to_string(path).map_err(|e| EvalError::Report {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        serde_json::from_str(&json).map_err(|e| EvalError::Report {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}

/// Rank a query's target answers against precomputed entity
/// representations (one per entity id, as from
/// [`all_entity_representations`]): every candidate is scored by best-branch
/// negative L1 distance, then each target is ranked against non-answers
/// only.
pub fn rank_query_answers(
    store: &ParameterStore,
    model: QueryModel<'_>,
    reps: &[crate::Tensor],
    q: &crate::query::QueryDag,
    answers: &std::collections::BTreeSet<crate::kg::EntityId>,
    targets: &std::collections::BTreeSet<crate::kg::EntityId>,
) -> EvalResult<Vec<usize>> {
    let emb = embed_query(store, model, q)?;
    let scores: Vec<Real> = reps.iter().map(|rep| score_against(&emb, rep)).collect();
    Ok(ranks_from_scores(&scores, answers, targets))
}

/// Evaluate query sets under a regime against a trained checkpoint.
///
/// Candidates are scored with the checkpoint's entity representations; each
/// true answer is ranked only against non-answers. In the generalization
/// regime only answers unreachable on the training graph are ranked.
pub fn run_regime(
    regime: Regime,
    splits: &SplitGraphs,
    store: &ParameterStore,
    meta: &ModelMeta,
    query_sets: &[&QuerySet],
) -> EvalResult<EvalReport> {
    if meta.regime != regime {
        return Err(EvalError::RegimeMismatch {
            requested: regime,
            trained: meta.regime,
        });
    }
    if regime == Regime::Inductive && !(meta.config.inductive && meta.config.temp.ter_enabled()) {
        return Err(EvalError::NotInductiveModel);
    }
    for qs in query_sets {
        if qs.regime != regime {
            return Err(EvalError::RegimeMismatch {
                requested: regime,
                trained: qs.regime,
            });
        }
    }

    // the type graph must match what training saw
    let (_, tg) = training_graphs(splits, regime);
    let kg = &splits.test;
    let model = QueryModel::new(kg, &tg, &meta.config);
    let reps = all_entity_representations(store, model)?;

    let mut buckets: BTreeMap<Structure, Vec<Vec<usize>>> = BTreeMap::new();
    for qs in query_sets {
        for q in &qs.queries {
            let targets = match regime {
                Regime::Generalization => {
                    let easy = answer_query(&splits.train, &q.dag)?;
                    let hard: std::collections::BTreeSet<_> =
                        q.answers.difference(&easy).copied().collect();
                    if hard.is_empty() {
                        continue;
                    }
                    hard
                }
                Regime::Deductive | Regime::Inductive => q.answers.clone(),
            };
            let ranks = rank_query_answers(store, model, &reps, &q.dag, &q.answers, &targets)?;
            buckets.entry(q.dag.structure()).or_default().push(ranks);
        }
    }

    let mut per_structure = BTreeMap::new();
    for (structure, ranks) in &buckets {
        per_structure.insert(
            *structure,
            StructureMetrics {
                mrr: mrr(ranks)?,
                hits1: hits_at_k(ranks, 1)?,
                hits3: hits_at_k(ranks, 3)?,
                hits10: hits_at_k(ranks, 10)?,
                queries: ranks.len(),
            },
        );
    }
    if per_structure.is_empty() {
        return Err(EvalError::EmptyQuerySet);
    }

    let n = per_structure.len() as Real;
    let average = StructureMetrics {
        mrr: per_structure.values().map(|m| m.mrr).sum::<Real>() / n,
        hits1: per_structure.values().map(|m| m.hits1).sum::<Real>() / n,
        hits3: per_structure.values().map(|m| m.hits3).sum::<Real>() / n,
        hits10: per_structure.values().map(|m| m.hits10).sum::<Real>() / n,
        queries: per_structure.values().map(|m| m.queries).sum(),
    };

    Ok(EvalReport {
        schema_version: 1,
        regime,
        model: meta.config.clone(),
        per_structure,
        average,
    })
}
