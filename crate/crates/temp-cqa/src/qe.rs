//! Point-embedding query engine hosting the type enhancements.
//!
//! Queries embed bottom-up over their DAG: anchors load entity embeddings
//! (type-enhanced when TER is on), projections translate by the relation
//! vector (with the entity/relation pair rewritten by TRR when on), and
//! intersections go through a permutation-invariant deep-set. Union queries
//! embed one vector per union-free branch and score against the best branch
//! by negative L1 distance.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, KnowledgeGraph, TypeId, UNKNOWN_TYPE};
use crate::numcore::{concat_cols, min_list, InitScheme, NumError, ParamSpec};
use crate::query::{QueryDag, QueryNode, Regime};
use crate::temp::{
    ter_aggregate, ter_entity, trr_attention, trr_enhance, Aggregator, Fusion, TempError,
    TerConfig, TrrConfig,
};
use crate::typegraph::TypeGraph;
use crate::{ParameterStore, Real, Tape, Tensor, Var};

#[derive(Debug, Error)]
pub enum QeError {
    #[error(transparent)]
    Num(#[from] NumError),

    #[error(transparent)]
    Temp(#[from] TempError),

    #[error("entity id {0} is not in the vocabulary")]
    UnknownEntity(usize),

    #[error("inductive scoring requires the entity-side type enhancement")]
    InductiveNeedsTer,

    #[error("at least one negative sample is required")]
    EmptyNegatives,

    #[error("checkpoint {path}: {reason}")]
    Checkpoint { path: String, reason: String },
}

pub type QeResult<T> = Result<T, QeError>;

/// Which type enhancements are active; mirrors the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TempMode {
    Off,
    TerOnly,
    TrrOnly,
    #[default]
    Both,
}

impl TempMode {
    pub fn ter_enabled(&self) -> bool {
        matches!(self, TempMode::TerOnly | TempMode::Both)
    }

    pub fn trr_enabled(&self) -> bool {
        matches!(self, TempMode::TrrOnly | TempMode::Both)
    }

    pub fn enabled(&self) -> bool {
        !matches!(self, TempMode::Off)
    }
}

impl std::fmt::Display for TempMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TempMode::Off => "off",
            TempMode::TerOnly => "ter_only",
            TempMode::TrrOnly => "trr_only",
            TempMode::Both => "both",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for TempMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(TempMode::Off),
            "ter_only" => Ok(TempMode::TerOnly),
            "trr_only" => Ok(TempMode::TrrOnly),
            "both" => Ok(TempMode::Both),
            other => Err(format!("unknown temp mode `{other}`")),
        }
    }
}

/// Model hyperparameters. Benchmark-scale values are dim 800, batch 512,
/// 128 negatives, margin 24; the defaults here are desk-scale except for the
/// margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelConfig {
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default)]
    pub temp: TempMode,
    #[serde(default = "default_margin")]
    pub margin: Real,
    #[serde(default = "default_negatives")]
    pub negative_samples: usize,
    #[serde(default = "default_highway_k")]
    pub highway_k: usize,
    #[serde(default)]
    pub entity_aggregator: Aggregator,
    #[serde(default)]
    pub fusion: Fusion,
    #[serde(default)]
    pub inductive: bool,
}

fn default_dim() -> usize {
    32
}

fn default_margin() -> Real {
    24.0
}

fn default_negatives() -> usize {
    8
}

fn default_highway_k() -> usize {
    2
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: default_dim(),
            temp: TempMode::default(),
            margin: default_margin(),
            negative_samples: default_negatives(),
            highway_k: default_highway_k(),
            entity_aggregator: Aggregator::default(),
            fusion: Fusion::default(),
            inductive: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> QeResult<()> {
        if self.dim == 0 {
            return Err(QeError::Temp(TempError::Config("dim must be >= 1".into())));
        }
        if self.inductive && !self.temp.ter_enabled() {
            return Err(QeError::InductiveNeedsTer);
        }
        self.ter_config().validate()?;
        self.trr_config().validate()?;
        Ok(())
    }

    pub fn ter_config(&self) -> TerConfig {
        TerConfig {
            dim: self.dim,
            highway_k: self.highway_k,
            aggregator: self.entity_aggregator,
            inductive: self.inductive,
        }
    }

    pub fn trr_config(&self) -> TrrConfig {
        TrrConfig::new(self.dim, self.fusion)
    }
}

/// A query embedding: one vector per union-free branch.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryEmbedding {
    pub branches: Vec<Tensor>,
}

/// Immutable context a model forward pass runs against.
#[derive(Clone, Copy)]
pub struct QueryModel<'a> {
    /// Graph providing the vocabulary and the entity-type assertions.
    pub kg: &'a KnowledgeGraph,
    /// Type graph providing per-relation type lists.
    pub tg: &'a TypeGraph,
    pub config: &'a ModelConfig,
}

impl<'a> QueryModel<'a> {
    pub fn new(kg: &'a KnowledgeGraph, tg: &'a TypeGraph, config: &'a ModelConfig) -> Self {
        QueryModel { kg, tg, config }
    }
}

fn ent_name(e: EntityId) -> String {
    format!("ent.{}", e.0)
}

fn rel_name(r: crate::kg::RelationId) -> String {
    format!("rel.{}", r.0)
}

fn type_name(t: TypeId) -> String {
    format!("type.{}", t.0)
}

/// All learnable tensors of a model over a vocabulary. Entity embeddings are
/// omitted in inductive mode, where entities are reachable only through
/// their types.
pub fn param_specs(kg: &KnowledgeGraph, config: &ModelConfig) -> Vec<ParamSpec> {
    let d = config.dim;
    let mut specs = Vec::new();
    if !config.inductive {
        for i in 0..kg.entity_count() {
            specs.push(ParamSpec::new(
                ent_name(EntityId(i)),
                (d, 1),
                InitScheme::Uniform,
            ));
        }
    }
    for i in 0..kg.relation_count() {
        specs.push(ParamSpec::new(
            rel_name(crate::kg::RelationId(i)),
            (d, 1),
            InitScheme::Uniform,
        ));
    }
    if config.temp.enabled() {
        for i in 0..kg.type_count() {
            specs.push(ParamSpec::new(
                type_name(TypeId(i)),
                (d, 1),
                InitScheme::Uniform,
            ));
        }
    }
    if config.temp.ter_enabled() {
        specs.extend(config.ter_config().param_specs());
    }
    if config.temp.trr_enabled() {
        specs.extend(config.trr_config().param_specs());
    }
    // deep-set intersection
    specs.push(ParamSpec::new("inter.pre_w", (d, d), InitScheme::Uniform));
    specs.push(ParamSpec::new("inter.pre_b", (d, 1), InitScheme::Zeros));
    specs.push(ParamSpec::new("inter.post_w1", (d, d), InitScheme::Uniform));
    specs.push(ParamSpec::new("inter.post_b1", (d, 1), InitScheme::Zeros));
    specs.push(ParamSpec::new("inter.post_w2", (d, d), InitScheme::Uniform));
    specs.push(ParamSpec::new("inter.post_b2", (d, 1), InitScheme::Zeros));
    specs
}

/// Per-tape memo for entity representations and relation type aggregates.
/// Entities and relations recur many times inside one batch; their enhanced
/// representations are pure in the parameters, so each is built once per
/// tape and the resulting node reused.
#[derive(Default)]
pub struct RepCache<'t> {
    entities: std::cell::RefCell<std::collections::HashMap<usize, Var<'t>>>,
    relation_aggs: std::cell::RefCell<std::collections::HashMap<usize, Var<'t>>>,
}

impl<'t> RepCache<'t> {
    pub fn new() -> Self {
        RepCache::default()
    }
}

/// Representation of one entity on the tape: the raw embedding, or the
/// TER-enhanced vector when the entity-side enhancement is active.
pub fn entity_representation<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    e: EntityId,
) -> QeResult<Var<'t>> {
    entity_representation_cached(tape, store, model, &RepCache::new(), e)
}

fn entity_representation_cached<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    cache: &RepCache<'t>,
    e: EntityId,
) -> QeResult<Var<'t>> {
    if let Some(&var) = cache.entities.borrow().get(&e.0) {
        return Ok(var);
    }
    if !model.kg.contains_entity(e) {
        return Err(QeError::UnknownEntity(e.0));
    }
    let rep = if !model.config.temp.ter_enabled() {
        if model.config.inductive {
            return Err(QeError::InductiveNeedsTer);
        }
        tape.param(store, &ent_name(e))?
    } else {
        let cfg = model.config.ter_config();
        let type_cols = entity_type_columns(tape, store, model, e)?;
        let agg = ter_aggregate(tape, store, &cfg, type_cols)?;
        let base = if model.config.inductive {
            None
        } else {
            Some(tape.param(store, &ent_name(e))?)
        };
        ter_entity(tape, store, &cfg, base, agg)?
    };
    cache.entities.borrow_mut().insert(e.0, rep);
    Ok(rep)
}

/// The entity's type vectors as a `d x n` matrix; untyped entities get the
/// UNKNOWN column.
fn entity_type_columns<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    e: EntityId,
) -> QeResult<Var<'t>> {
    let types = model
        .kg
        .entity_types(e)
        .map_err(|_| QeError::UnknownEntity(e.0))?;
    let cols: Vec<Var<'t>> = if types.is_empty() {
        vec![tape.param(store, &type_name(UNKNOWN_TYPE))?]
    } else {
        types
            .iter()
            .map(|t| tape.param(store, &type_name(*t)))
            .collect::<Result<_, _>>()?
    };
    Ok(concat_cols(&cols)?)
}

/// Attention-aggregated type vector of a relation, memoized per tape.
fn relation_type_aggregate<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    cache: &RepCache<'t>,
    r: crate::kg::RelationId,
) -> QeResult<Var<'t>> {
    if let Some(&var) = cache.relation_aggs.borrow().get(&r.0) {
        return Ok(var);
    }
    let types = model.tg.type_list_or_unknown(r);
    let vecs: Vec<Var<'t>> = types
        .iter()
        .map(|t| tape.param(store, &type_name(*t)))
        .collect::<Result<_, _>>()?;
    let agg = trr_attention(tape, store, &vecs)?;
    cache.relation_aggs.borrow_mut().insert(r.0, agg);
    Ok(agg)
}

/// One projection hop: translate the current vector by the relation vector,
/// both rewritten by TRR when the relation-side enhancement is active.
fn project<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    cache: &RepCache<'t>,
    current: Var<'t>,
    r: crate::kg::RelationId,
) -> QeResult<Var<'t>> {
    let rel = tape.param(store, &rel_name(r))?;
    if model.config.temp.trr_enabled() {
        let type_agg = relation_type_aggregate(tape, store, model, cache, r)?;
        let cfg = model.config.trr_config();
        let (ent, rel) = trr_enhance(tape, store, &cfg, current, rel, type_agg)?;
        Ok(ent.add(rel)?)
    } else {
        Ok(current.add(rel)?)
    }
}

/// Deep-set intersection: mean the per-branch features, then map through the
/// output network. Inputs are sorted structurally by the caller, so the sum
/// order is canonical.
fn intersect_vars<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    vars: &[Var<'t>],
) -> QeResult<Var<'t>> {
    let pre_w = tape.param(store, "inter.pre_w")?;
    let pre_b = tape.param(store, "inter.pre_b")?;
    let mut feats = Vec::with_capacity(vars.len());
    for v in vars {
        feats.push(pre_w.matmul(*v)?.add(pre_b)?.relu());
    }
    let mut acc = feats[0];
    for f in &feats[1..] {
        acc = acc.add(*f)?;
    }
    let mean = acc.scale(1.0 / vars.len() as Real);
    let w1 = tape.param(store, "inter.post_w1")?;
    let b1 = tape.param(store, "inter.post_b1")?;
    let w2 = tape.param(store, "inter.post_w2")?;
    let b2 = tape.param(store, "inter.post_b2")?;
    Ok(w2.matmul(w1.matmul(mean)?.add(b1)?.relu())?.add(b2)?)
}

/// Structural sort key so intersections embed identically under branch
/// permutation.
fn node_key(node: &QueryNode, out: &mut Vec<usize>) {
    match node {
        QueryNode::Anchor(e) => {
            out.push(0);
            out.push(e.0);
        }
        QueryNode::Project { input, relation } => {
            out.push(1);
            out.push(relation.0);
            node_key(input, out);
        }
        QueryNode::Intersect(children) => {
            out.push(2);
            out.push(children.len());
            for c in children {
                node_key(c, out);
            }
        }
        QueryNode::Union(children) => {
            out.push(3);
            out.push(children.len());
            for c in children {
                node_key(c, out);
            }
        }
    }
}

/// Embed a DAG node into its union-free branch vectors.
fn embed_node<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    cache: &RepCache<'t>,
    node: &QueryNode,
) -> QeResult<Vec<Var<'t>>> {
    match node {
        QueryNode::Anchor(e) => Ok(vec![entity_representation_cached(
            tape, store, model, cache, *e,
        )?]),
        QueryNode::Project { input, relation } => {
            let branches = embed_node(tape, store, model, cache, input)?;
            branches
                .into_iter()
                .map(|b| project(tape, store, model, cache, b, *relation))
                .collect()
        }
        QueryNode::Intersect(children) => {
            let mut ordered: Vec<&QueryNode> = children.iter().collect();
            ordered.sort_by_cached_key(|c| {
                let mut key = Vec::new();
                node_key(c, &mut key);
                key
            });
            let mut vars = Vec::with_capacity(ordered.len());
            for c in ordered {
                let mut branches = embed_node(tape, store, model, cache, c)?;
                debug_assert_eq!(branches.len(), 1, "no unions under intersections");
                vars.push(branches.remove(0));
            }
            Ok(vec![intersect_vars(tape, store, &vars)?])
        }
        QueryNode::Union(children) => {
            let mut branches = Vec::new();
            for c in children {
                branches.extend(embed_node(tape, store, model, cache, c)?);
            }
            Ok(branches)
        }
    }
}

/// Embed a query on an existing tape, returning one var per DNF branch.
pub fn embed_query_vars<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    q: &QueryDag,
) -> QeResult<Vec<Var<'t>>> {
    embed_node(tape, store, model, &RepCache::new(), q.root())
}

/// Embed a query into branch tensors.
pub fn embed_query(
    store: &ParameterStore,
    model: QueryModel<'_>,
    q: &QueryDag,
) -> QeResult<QueryEmbedding> {
    let tape = Tape::new();
    let branches = embed_query_vars(&tape, store, model, q)?;
    Ok(QueryEmbedding {
        branches: branches.iter().map(|b| b.value()).collect(),
    })
}

/// Distance from a query embedding to a target var on the tape: the minimum
/// over branches of the L1 distance.
pub fn distance_var<'t>(branches: &[Var<'t>], target: Var<'t>) -> QeResult<Var<'t>> {
    let dists: Vec<Var<'t>> = branches
        .iter()
        .map(|b| b.l1_distance(target))
        .collect::<Result<_, _>>()?;
    Ok(min_list(&dists)?)
}

/// Score an entity against a query embedding: negative best-branch L1
/// distance, so higher is better.
pub fn score(
    qe: &QueryEmbedding,
    e: EntityId,
    store: &ParameterStore,
    model: QueryModel<'_>,
) -> QeResult<Real> {
    let tape = Tape::new();
    let rep = entity_representation(&tape, store, model, e)?.value();
    Ok(score_against(qe, &rep))
}

/// Score a precomputed entity representation against a query embedding.
pub fn score_against(qe: &QueryEmbedding, rep: &Tensor) -> Real {
    -qe.branches
        .iter()
        .map(|b| b.l1_distance(rep).expect("matching widths"))
        .fold(Real::INFINITY, Real::min)
}

/// Representations of every entity, for ranking against query embeddings.
pub fn all_entity_representations(
    store: &ParameterStore,
    model: QueryModel<'_>,
) -> QeResult<Vec<Tensor>> {
    let tape = Tape::new();
    (0..model.kg.entity_count())
        .map(|i| Ok(entity_representation(&tape, store, model, EntityId(i))?.value()))
        .collect()
}

/// Margin ranking loss of one query: the mean over negatives of
/// `max(0, margin - score(pos) + score(neg))`, on the tape.
pub fn loss_var<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    q: &QueryDag,
    positive: EntityId,
    negatives: &[EntityId],
) -> QeResult<Var<'t>> {
    loss_var_cached(tape, store, model, &RepCache::new(), q, positive, negatives)
}

fn loss_var_cached<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    cache: &RepCache<'t>,
    q: &QueryDag,
    positive: EntityId,
    negatives: &[EntityId],
) -> QeResult<Var<'t>> {
    if negatives.is_empty() {
        return Err(QeError::EmptyNegatives);
    }
    let branches = embed_node(tape, store, model, cache, q.root())?;
    let pos_rep = entity_representation_cached(tape, store, model, cache, positive)?;
    let d_pos = distance_var(&branches, pos_rep)?;
    let margin = tape.scalar(model.config.margin);

    let mut acc: Option<Var<'t>> = None;
    for &n in negatives {
        let neg_rep = entity_representation_cached(tape, store, model, cache, n)?;
        let d_neg = distance_var(&branches, neg_rep)?;
        // margin + d_pos - d_neg, hinged
        let h = margin.add(d_pos)?.sub(d_neg)?.relu();
        acc = Some(match acc {
            Some(a) => a.add(h)?,
            None => h,
        });
    }
    Ok(acc.unwrap().scale(1.0 / negatives.len() as Real))
}

/// Mean margin loss over a batch, sharing one representation cache so each
/// entity and relation is enhanced once per step.
pub fn batch_loss<'t>(
    tape: &'t Tape,
    store: &ParameterStore,
    model: QueryModel<'_>,
    items: &[(&QueryDag, EntityId, &[EntityId])],
) -> QeResult<Var<'t>> {
    let cache = RepCache::new();
    let mut acc: Option<Var<'t>> = None;
    for (q, pos, negs) in items {
        let l = loss_var_cached(tape, store, model, &cache, q, *pos, negs)?;
        acc = Some(match acc {
            Some(a) => a.add(l)?,
            None => l,
        });
    }
    match acc {
        Some(a) => Ok(a.scale(1.0 / items.len() as Real)),
        None => Err(QeError::EmptyNegatives),
    }
}

/// Model metadata stored next to the parameter checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub schema_version: u32,
    pub config: ModelConfig,
    pub regime: Regime,
    pub seed: u64,
}

/// Save parameters plus model metadata into `dir`.
pub fn save_checkpoint(dir: &Path, store: &ParameterStore, meta: &ModelMeta) -> QeResult<()> {
    store.save(dir)?;
    let path = dir.join("model.json");
    let json = serde_json::to_string_pretty(meta).expect("meta serializes");
    fs::write(&path, json).map_err(|e| QeError::Checkpoint {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok(())
}

/// Load a checkpoint saved by [`save_checkpoint`].
pub fn load_checkpoint(dir: &Path) -> QeResult<(ParameterStore, ModelMeta)> {
    let store = ParameterStore::load(dir)?;
    let path = dir.join("model.json");
    let json = fs::read_to_string(&path).map_err(|e| QeError::Checkpoint {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let meta: ModelMeta = serde_json::from_str(&json).map_err(|e| QeError::Checkpoint {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    Ok((store, meta))
}
