//! Relation-side type aggregation and pairwise integration.

use crate::numcore::{concat_rows, softmax_list, ParameterStore, Scalar, Tape, Tensor, Var};

use super::{Fusion, TempError, TempResult, TrrConfig};

/// Which representation pair a bidirectional integration acts on. Each pair
/// kind has its own parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    EntityRelation,
    EntityType,
    RelationType,
}

impl PairKind {
    fn key(&self) -> &'static str {
        match self {
            PairKind::EntityRelation => "er",
            PairKind::EntityType => "es",
            PairKind::RelationType => "rs",
        }
    }
}

/// Which output the fusion/projection parameters belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Entity,
    Relation,
}

impl Side {
    fn key(&self) -> &'static str {
        match self {
            Side::Entity => "ent",
            Side::Relation => "rel",
        }
    }
}

/// The attention scoring network: one hidden relu layer, linear output.
fn score_mlp<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    x: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let w1 = tape.param(store, "trr.att_w1")?;
    let b1 = tape.param(store, "trr.att_b1")?;
    let w2 = tape.param(store, "trr.att_w2")?;
    let b2 = tape.param(store, "trr.att_b2")?;
    let hidden = w1.matmul(x)?.add(b1)?.relu();
    Ok(w2.matmul(hidden)?.add(b2)?)
}

/// Per-type attention weight vectors: an elementwise softmax over the scored
/// type vectors, so for every coordinate the weights sum to one.
pub fn attention_weights<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    type_vecs: &[Var<'t, F>],
) -> TempResult<Vec<Var<'t, F>>> {
    if type_vecs.is_empty() {
        return Err(TempError::EmptyTypeList);
    }
    let logits: Vec<Var<'t, F>> = type_vecs
        .iter()
        .map(|&v| score_mlp(tape, store, v))
        .collect::<TempResult<_>>()?;
    Ok(softmax_list(&logits)?)
}

/// Attention aggregation of a relation's type vectors:
/// the weighted elementwise sum of the vectors under [`attention_weights`].
pub fn trr_attention<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    type_vecs: &[Var<'t, F>],
) -> TempResult<Var<'t, F>> {
    let weights = attention_weights(tape, store, type_vecs)?;
    let mut acc = weights[0].mul_elem(type_vecs[0])?;
    for (w, v) in weights.iter().zip(type_vecs.iter()).skip(1) {
        acc = acc.add(w.mul_elem(*v)?)?;
    }
    Ok(acc)
}

/// Bidirectional integration of a representation pair: each direction stacks
/// the elementwise difference and product, then applies its own relu-affine
/// map, yielding `2d`-wide states `(G_xy, G_yx)`.
pub fn bidir_integrate<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    kind: PairKind,
    x: Var<'t, F>,
    y: Var<'t, F>,
) -> TempResult<(Var<'t, F>, Var<'t, F>)> {
    let key = kind.key();
    let one_way = |w: &str, b: &str, a: Var<'t, F>, z: Var<'t, F>| -> TempResult<Var<'t, F>> {
        let stacked = concat_rows(&[a.sub(z)?, a.mul_elem(z)?])?;
        let wv = tape.param(store, w)?;
        let bv = tape.param(store, b)?;
        Ok(wv.matmul(stacked)?.add(bv)?.relu())
    };
    let fwd = one_way(
        &format!("trr.bi.{key}.w_fwd"),
        &format!("trr.bi.{key}.b_fwd"),
        x,
        y,
    )?;
    let rev = one_way(
        &format!("trr.bi.{key}.w_rev"),
        &format!("trr.bi.{key}.b_rev"),
        y,
        x,
    )?;
    Ok((fwd, rev))
}

/// Gated combination of two `2d` states: a sigmoid gate computed from both
/// inputs interpolates between them coordinatewise.
pub fn gated_fuse<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    side: Side,
    a: Var<'t, F>,
    b: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let key = side.key();
    let w_a = tape.param(store, &format!("trr.gate.{key}.w_a"))?;
    let w_b = tape.param(store, &format!("trr.gate.{key}.w_b"))?;
    let b_a = tape.param(store, &format!("trr.gate.{key}.b_a"))?;
    let b_b = tape.param(store, &format!("trr.gate.{key}.b_b"))?;
    let gate = w_a
        .matmul(a)?
        .add(w_b.matmul(b)?)?
        .add(b_a)?
        .add(b_b)?
        .sigmoid();
    let (rows, cols) = gate.shape();
    let ones = tape.constant(Tensor::from_fn(rows, cols, |_, _| F::one()));
    Ok(gate.mul_elem(a)?.add(ones.sub(gate)?.mul_elem(b)?)?)
}

/// Interactive-concatenation combination of two `2d` states: stacks
/// `[a, b, a + b, a * b]` and maps the `8d` vector back to `2d`.
pub fn concat_fuse<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    side: Side,
    a: Var<'t, F>,
    b: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let key = side.key();
    let stacked = concat_rows(&[a, b, a.add(b)?, a.mul_elem(b)?])?;
    let w = tape.param(store, &format!("trr.cat.{key}.w"))?;
    let bias = tape.param(store, &format!("trr.cat.{key}.b"))?;
    Ok(w.matmul(stacked)?.add(bias)?)
}

/// Final linear layer from the fused `2d` state back to model width `d`.
pub fn project_back<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    side: Side,
    fused: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let key = side.key();
    let w = tape.param(store, &format!("trr.proj.{key}.w"))?;
    let b = tape.param(store, &format!("trr.proj.{key}.b"))?;
    Ok(w.matmul(fused)?.add(b)?)
}

/// Full relation-side enhancement: integrate the entity-relation,
/// entity-type, and relation-type pairs bidirectionally, fuse the two states
/// feeding each side, and project back to width `d`. Returns the enhanced
/// `(entity, relation)` pair.
pub fn trr_enhance<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    cfg: &TrrConfig,
    entity: Var<'t, F>,
    relation: Var<'t, F>,
    type_agg: Var<'t, F>,
) -> TempResult<(Var<'t, F>, Var<'t, F>)> {
    let (g_er, g_re) = bidir_integrate(tape, store, PairKind::EntityRelation, entity, relation)?;
    // the type-aware reverse states are produced but only the four consumed
    // below feed the outputs
    let (g_es, _g_se) = bidir_integrate(tape, store, PairKind::EntityType, entity, type_agg)?;
    let (g_rs, _g_sr) = bidir_integrate(tape, store, PairKind::RelationType, relation, type_agg)?;

    let fuse = |side: Side, a: Var<'t, F>, b: Var<'t, F>| -> TempResult<Var<'t, F>> {
        match cfg.fusion {
            Fusion::Gated => gated_fuse(tape, store, side, a, b),
            Fusion::Concat => concat_fuse(tape, store, side, a, b),
        }
    };
    let entity_out = project_back(tape, store, Side::Entity, fuse(Side::Entity, g_er, g_es)?)?;
    let relation_out = project_back(
        tape,
        store,
        Side::Relation,
        fuse(Side::Relation, g_re, g_rs)?,
    )?;
    Ok((entity_out, relation_out))
}
