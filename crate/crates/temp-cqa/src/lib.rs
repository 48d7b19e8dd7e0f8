//! Type-aware message passing (TEMP) for first-order logical query answering
//! over knowledge graphs.
//!
//! The crate hosts a point-embedding query engine whose entity and relation
//! representations can be enriched with entity-type information: a type-aware
//! entity representation (TER) aggregates an entity's types, and a type-aware
//! relation representation (TRR) derives relation types from a type graph and
//! integrates them with entity and relation vectors through bidirectional
//! attention and gating. Both enhancements are plug-ins: disabling them
//! reproduces the base model exactly.
//!
//! The numeric core is generic over the scalar type; everything above it uses
//! the f64 aliases exported here.

pub mod cli;
pub mod eval;
pub mod kg;
pub mod numcore;
pub mod qe;
pub mod query;
pub mod temp;
pub mod train;
pub mod typegraph;

/// Scalar type used by the models.
pub type Real = f64;
/// f64 tensor.
pub type Tensor = numcore::Tensor<Real>;
/// f64 differentiation tape.
pub type Tape = numcore::Tape<Real>;
/// f64 tape variable.
pub type Var<'t> = numcore::Var<'t, Real>;
/// f64 parameter store.
pub type ParameterStore = numcore::ParameterStore<Real>;
