//! Type-aware entity and relation representations.
//!
//! TER aggregates an entity's type vectors (iterated highway layer, or the
//! mean/max alternatives) and fuses the aggregate with the entity embedding.
//! TRR attention-aggregates a relation's type vectors from the type graph,
//! then integrates entity, relation, and type states pairwise through a
//! bidirectional attention step, a gated (or concatenation) fusion, and a
//! final linear projection back to model width.

mod ter;
mod trr;

pub use ter::{ter_aggregate, ter_entity, ter_highway, ter_max, ter_mean};
pub use trr::{
    attention_weights, bidir_integrate, concat_fuse, gated_fuse, project_back, trr_attention,
    trr_enhance, PairKind, Side,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numcore::{InitScheme, NumError, ParamSpec};

#[derive(Debug, Error)]
pub enum TempError {
    #[error(transparent)]
    Num(#[from] NumError),

    #[error("inductive entity enhancement must not see an entity embedding")]
    EntityVecForbidden,

    #[error("transductive entity enhancement requires an entity embedding")]
    EntityVecRequired,

    #[error("attention aggregation needs at least one type vector")]
    EmptyTypeList,

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type TempResult<T> = Result<T, TempError>;

/// How an entity's type columns are reduced to one vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Highway,
    Mean,
    Max,
}

/// How the two bidirectional states are fused before projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Fusion {
    #[default]
    Gated,
    Concat,
}

/// Entity-side configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerConfig {
    pub dim: usize,
    /// Highway iterations; ignored by the mean/max aggregators.
    pub highway_k: usize,
    pub aggregator: Aggregator,
    pub inductive: bool,
}

impl TerConfig {
    pub fn validate(&self) -> TempResult<()> {
        if self.dim == 0 {
            return Err(TempError::Config("dim must be at least 1".into()));
        }
        if self.aggregator == Aggregator::Highway && self.highway_k == 0 {
            return Err(TempError::Config(
                "highway aggregation needs highway_k >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Learnable tensors of the entity side.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d = self.dim;
        let mut specs = Vec::new();
        if self.aggregator == Aggregator::Highway {
            for i in 0..self.highway_k {
                specs.push(ParamSpec::new(
                    format!("ter.gate_w.{i}"),
                    (d, d),
                    InitScheme::Uniform,
                ));
                specs.push(ParamSpec::new(
                    format!("ter.gate_b.{i}"),
                    (d, 1),
                    InitScheme::Zeros,
                ));
                specs.push(ParamSpec::new(
                    format!("ter.trans_w.{i}"),
                    (d, d),
                    InitScheme::Uniform,
                ));
                specs.push(ParamSpec::new(
                    format!("ter.trans_b.{i}"),
                    (d, 1),
                    InitScheme::Zeros,
                ));
            }
        }
        specs.push(ParamSpec::new("ter.out_w", (d, d), InitScheme::Uniform));
        specs.push(ParamSpec::new("ter.out_b", (d, 1), InitScheme::Zeros));
        if self.inductive {
            specs.push(ParamSpec::new("ter.ind_w", (d, d), InitScheme::Uniform));
            specs.push(ParamSpec::new("ter.ind_b", (d, 1), InitScheme::Zeros));
        } else {
            specs.push(ParamSpec::new("ter.ent_w", (d, 2 * d), InitScheme::Uniform));
            specs.push(ParamSpec::new("ter.ent_b", (d, 1), InitScheme::Zeros));
        }
        specs
    }
}

/// Relation-side configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrrConfig {
    pub dim: usize,
    pub fusion: Fusion,
    /// Hidden width of the attention scoring network.
    pub attention_hidden: usize,
}

impl TrrConfig {
    pub fn new(dim: usize, fusion: Fusion) -> Self {
        TrrConfig {
            dim,
            fusion,
            attention_hidden: dim,
        }
    }

    pub fn validate(&self) -> TempResult<()> {
        if self.dim == 0 || self.attention_hidden == 0 {
            return Err(TempError::Config("dim must be at least 1".into()));
        }
        Ok(())
    }

    /// Learnable tensors of the relation side.
    pub fn param_specs(&self) -> Vec<ParamSpec> {
        let d = self.dim;
        let h = self.attention_hidden;
        let d2 = 2 * d;
        let mut specs = vec![
            ParamSpec::new("trr.att_w1", (h, d), InitScheme::Uniform),
            ParamSpec::new("trr.att_b1", (h, 1), InitScheme::Zeros),
            ParamSpec::new("trr.att_w2", (d, h), InitScheme::Uniform),
            ParamSpec::new("trr.att_b2", (d, 1), InitScheme::Zeros),
        ];
        for kind in ["er", "es", "rs"] {
            specs.push(ParamSpec::new(
                format!("trr.bi.{kind}.w_fwd"),
                (d2, d2),
                InitScheme::Uniform,
            ));
            specs.push(ParamSpec::new(
                format!("trr.bi.{kind}.b_fwd"),
                (d2, 1),
                InitScheme::Zeros,
            ));
            specs.push(ParamSpec::new(
                format!("trr.bi.{kind}.w_rev"),
                (d2, d2),
                InitScheme::Uniform,
            ));
            specs.push(ParamSpec::new(
                format!("trr.bi.{kind}.b_rev"),
                (d2, 1),
                InitScheme::Zeros,
            ));
        }
        for side in ["ent", "rel"] {
            match self.fusion {
                Fusion::Gated => {
                    specs.push(ParamSpec::new(
                        format!("trr.gate.{side}.w_a"),
                        (d2, d2),
                        InitScheme::Uniform,
                    ));
                    specs.push(ParamSpec::new(
                        format!("trr.gate.{side}.w_b"),
                        (d2, d2),
                        InitScheme::Uniform,
                    ));
                    specs.push(ParamSpec::new(
                        format!("trr.gate.{side}.b_a"),
                        (d2, 1),
                        InitScheme::Zeros,
                    ));
                    specs.push(ParamSpec::new(
                        format!("trr.gate.{side}.b_b"),
                        (d2, 1),
                        InitScheme::Zeros,
                    ));
                }
                Fusion::Concat => {
                    specs.push(ParamSpec::new(
                        format!("trr.cat.{side}.w"),
                        (d2, 4 * d2),
                        InitScheme::Uniform,
                    ));
                    specs.push(ParamSpec::new(
                        format!("trr.cat.{side}.b"),
                        (d2, 1),
                        InitScheme::Zeros,
                    ));
                }
            }
            specs.push(ParamSpec::new(
                format!("trr.proj.{side}.w"),
                (d, d2),
                InitScheme::Uniform,
            ));
            specs.push(ParamSpec::new(
                format!("trr.proj.{side}.b"),
                (d, 1),
                InitScheme::Zeros,
            ));
        }
        specs
    }
}
