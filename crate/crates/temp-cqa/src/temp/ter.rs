//! Entity-side type aggregation and fusion.

use crate::numcore::{concat_rows, ParameterStore, Scalar, Tape, Tensor, Var};

use super::{Aggregator, TempResult, TerConfig};

/// One affine layer `w name . x + b name`, broadcasting the bias over columns.
fn affine<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    w: &str,
    b: &str,
    x: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let (_, n) = x.shape();
    let wv = tape.param(store, w)?;
    let bv = tape.param(store, b)?.broadcast_cols(n)?;
    Ok(wv.matmul(x)?.add(bv)?)
}

/// Iterated highway aggregation over an entity's type columns (`d x n`),
/// reduced to `d x 1` by a column mean followed by the output affine map.
///
///uEach iteration gates between a learned transform and the previous state:
/// `H <- g * (W' H + b') + (1 - g) * H` with `g = sigmoid(W H + b)`.
pub fn ter_highway<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    cfg: &TerConfig,
    type_cols: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let (d, n) = type_cols.shape();
    let mut h = type_cols;
    for i in 0..cfg.highway_k {
        let gate = affine(
            tape,
            store,
            &format!("ter.gate_w.{i}"),
            &format!("ter.gate_b.{i}"),
            h,
        )?
        .sigmoid();
        let transformed = affine(
            tape,
            store,
            &format!("ter.trans_w.{i}"),
            &format!("ter.trans_b.{i}"),
            h,
        )?;
        let ones = tape.constant(Tensor::from_fn(d, n, |_, _| F::one()));
        let carry = ones.sub(gate)?.mul_elem(h)?;
        h = gate.mul_elem(transformed)?.add(carry)?;
    }
    reduce(tape, store, h)
}

/// Column-mean aggregation followed by the output affine map.
pub fn ter_mean<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    type_cols: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    reduce(tape, store, type_cols)
}

/// Elementwise-max aggregation followed by the output affine map.
pub fn ter_max<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    type_cols: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let m = type_cols.max_cols();
    affine(tape, store, "ter.out_w", "ter.out_b", m)
}

fn reduce<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    cols: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    let m = cols.mean_cols();
    affine(tape, store, "ter.out_w", "ter.out_b", m)
}

/// Aggregate type columns with the configured aggregator.
pub fn ter_aggregate<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    cfg: &TerConfig,
    type_cols: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    match cfg.aggregator {
        Aggregator::Highway => ter_highway(tape, store, cfg, type_cols),
        Aggregator::Mean => ter_mean(tape, store, type_cols),
        Aggregator::Max => ter_max(tape, store, type_cols),
    }
}

/// Fuse the type aggregate with the entity embedding.
///
/// Transductively the two are concatenated (type aggregate first) and mapped
/// back to width `d`. Inductively the entity embedding must be absent: only
/// the type aggregate is transformed, so unseen entities stay representable
/// and no training-time embedding can leak in.
pub fn ter_entity<'t, F: Scalar>(
    tape: &'t Tape<F>,
    store: &ParameterStore<F>,
    cfg: &TerConfig,
    entity: Option<Var<'t, F>>,
    type_agg: Var<'t, F>,
) -> TempResult<Var<'t, F>> {
    match (cfg.inductive, entity) {
        (false, Some(e)) => {
            let cat = concat_rows(&[type_agg, e])?;
            Ok(affine(tape, store, "ter.ent_w", "ter.ent_b", cat)?)
        }
        (true, None) => Ok(affine(tape, store, "ter.ind_w", "ter.ind_b", type_agg)?),
        (true, Some(_)) => Err(super::TempError::EntityVecForbidden),
        (false, None) => Err(super::TempError::EntityVecRequired),
    }
}
