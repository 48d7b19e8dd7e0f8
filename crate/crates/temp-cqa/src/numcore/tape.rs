use std::cell::RefCell;
use std::collections::HashMap;

use super::error::{NumError, NumResult};
use super::params::ParameterStore;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Recorded operation; indices refer to earlier tape nodes.
#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    MulElem(usize, usize),
    DivElem(usize, usize),
    MatMul(usize, usize),
    Sigmoid(usize),
    Relu(usize),
    Abs(usize),
    Exp(usize),
    Scale(usize),
    MeanCols(usize),
    MaxCols(usize),
    SumAll(usize),
    BroadcastCols(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    MinList(Vec<usize>),
}

struct Node<F: Scalar> {
    value: Tensor<F>,
    op: Op,
    // extra payload for Scale
    factor: F,
}

/// Reverse-mode differentiation tape over tensors.
///
/// A fresh tape records one forward computation; [`Tape::backward`] then fills
/// the gradient slots of every parameter that was pulled in via [`Tape::param`].
pub struct Tape<F: Scalar> {
    nodes: RefCell<Vec<Node<F>>>,
    param_nodes: RefCell<HashMap<String, usize>>,
}

/// Handle to a tape node. Cheap to copy; tied to its tape by lifetime.
#[derive(Clone, Copy)]
pub struct Var<'t, F: Scalar> {
    tape: &'t Tape<F>,
    id: usize,
}

impl<F: Scalar> Default for Tape<F> {
    fn default() -> Self {
        Self::new()
    }
}

impl<F: Scalar> Tape<F> {
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            param_nodes: RefCell::new(HashMap::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<F>, op: Op) -> Var<'_, F> {
        self.push_with_factor(value, op, F::zero())
    }

    fn push_with_factor(&self, value: Tensor<F>, op: Op, factor: F) -> Var<'_, F> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node { value, op, factor });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    /// Record a constant input; no gradient flows into it.
    pub fn constant(&self, value: Tensor<F>) -> Var<'_, F> {
        self.push(value, Op::Leaf)
    }

    pub fn scalar(&self, v: F) -> Var<'_, F> {
        self.constant(Tensor::scalar(v))
    }

    /// Pull a named parameter onto the tape. Repeated pulls of the same name
    /// return the same node, so gradient contributions accumulate.
    pub fn param(&self, store: &ParameterStore<F>, name: &str) -> NumResult<Var<'_, F>> {
        if let Some(&id) = self.param_nodes.borrow().get(name) {
            return Ok(Var { tape: self, id });
        }
        let value = store.value(name)?.clone();
        let var = self.push(value, Op::Leaf);
        self.param_nodes
            .borrow_mut()
            .insert(name.to_string(), var.id);
        Ok(var)
    }

    pub fn value(&self, var: Var<'_, F>) -> Tensor<F> {
        self.nodes.borrow()[var.id].value.clone()
    }

    fn shape(&self, id: usize) -> (usize, usize) {
        self.nodes.borrow()[id].value.shape()
    }

    /// Backpropagate from a scalar loss, writing `d loss / d p` into the
    /// gradient slot of every parameter pulled onto this tape. Parameters the
    /// loss does not reach get zero gradients.
    pub fn backward(&self, loss: Var<'_, F>, store: &mut ParameterStore<F>) -> NumResult<()> {
        let grads = self.gradients(loss)?;
        store.zero_grads();
        for (name, &id) in self.param_nodes.borrow().iter() {
            if let Some(g) = &grads[id] {
                store.set_grad(name, g.clone())?;
            }
        }
        Ok(())
    }

    /// Gradients of a scalar loss with respect to every tape node.
    pub fn gradients(&self, loss: Var<'_, F>) -> NumResult<Vec<Option<Tensor<F>>>> {
        let nodes = self.nodes.borrow();
        if nodes.is_empty() {
            return Err(NumError::NoForwardRecorded);
        }
        let loss_shape = nodes[loss.id].value.shape();
        if loss_shape != (1, 1) {
            return Err(NumError::NotScalar {
                op: "backward",
                shape: loss_shape,
            });
        }

        let mut grads: Vec<Option<Tensor<F>>> = vec![None; nodes.len()];
        grads[loss.id] = Some(Tensor::scalar(F::one()));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            match &node.op {
                Op::Leaf => {}
                Op::Add(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.clone());
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *a, g.clone());
                    accumulate(&mut grads, *b, g.scale(-F::one()));
                }
                Op::MulElem(a, b) => {
                    let va = &nodes[*a].value;
                    let vb = &nodes[*b].value;
                    accumulate(&mut grads, *a, g.mul_elem(vb).unwrap());
                    accumulate(&mut grads, *b, g.mul_elem(va).unwrap());
                }
                Op::DivElem(a, b) => {
                    let va = &nodes[*a].value;
                    let vb = &nodes[*b].value;
                    accumulate(&mut grads, *a, g.div_elem(vb).unwrap());
                    let gb = g
                        .mul_elem(va)
                        .unwrap()
                        .div_elem(&vb.mul_elem(vb).unwrap())
                        .unwrap()
                        .scale(-F::one());
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMul(a, b) => {
                    let va = &nodes[*a].value;
                    let vb = &nodes[*b].value;
                    accumulate(&mut grads, *a, g.matmul(&vb.transpose()).unwrap());
                    accumulate(&mut grads, *b, va.transpose().matmul(&g).unwrap());
                }
                Op::Sigmoid(a) => {
                    let s = &node.value;
                    let one_minus = s.map(|v| F::one() - v);
                    let gx = g.mul_elem(s).unwrap().mul_elem(&one_minus).unwrap();
                    accumulate(&mut grads, *a, gx);
                }
                Op::Relu(a) => {
                    let va = &nodes[*a].value;
                    let mask = va.map(|v| if v > F::zero() { F::one() } else { F::zero() });
                    accumulate(&mut grads, *a, g.mul_elem(&mask).unwrap());
                }
                Op::Abs(a) => {
                    let va = &nodes[*a].value;
                    let sign = va.map(|v| {
                        if v > F::zero() {
                            F::one()
                        } else if v < F::zero() {
                            -F::one()
                        } else {
                            F::zero()
                        }
                    });
                    accumulate(&mut grads, *a, g.mul_elem(&sign).unwrap());
                }
                Op::Exp(a) => {
                    accumulate(&mut grads, *a, g.mul_elem(&node.value).unwrap());
                }
                Op::Scale(a) => {
                    accumulate(&mut grads, *a, g.scale(node.factor));
                }
                Op::MeanCols(a) => {
                    let (rows, cols) = nodes[*a].value.shape();
                    let inv = F::from_f64_lossy(1.0 / cols as f64);
                    let gx = Tensor::from_fn(rows, cols, |r, _| g.get(r, 0) * inv);
                    accumulate(&mut grads, *a, gx);
                }
                Op::MaxCols(a) => {
                    let va = &nodes[*a].value;
                    let (rows, cols) = va.shape();
                    let mut gx = Tensor::zeros(rows, cols);
                    for r in 0..rows {
                        let mut best_c = 0;
                        let mut best = va.get(r, 0);
                        for c in 1..cols {
                            let v = va.get(r, c);
                            if v > best {
                                best = v;
                                best_c = c;
                            }
                        }
                        gx.set(r, best_c, g.get(r, 0));
                    }
                    accumulate(&mut grads, *a, gx);
                }
                Op::SumAll(a) => {
                    let (rows, cols) = nodes[*a].value.shape();
                    let gv = g.item().unwrap();
                    accumulate(&mut grads, *a, Tensor::from_fn(rows, cols, |_, _| gv));
                }
                Op::BroadcastCols(a) => {
                    let rows = nodes[*a].value.rows();
                    let gx = Tensor::from_fn(rows, 1, |r, _| {
                        let mut acc = F::zero();
                        for c in 0..g.cols() {
                            acc += g.get(r, c);
                        }
                        acc
                    });
                    accumulate(&mut grads, *a, gx);
                }
                Op::ConcatRows(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (rows, cols) = nodes[p].value.shape();
                        let gp = Tensor::from_fn(rows, cols, |r, c| g.get(at + r, c));
                        at += rows;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut at = 0;
                    for &p in parts {
                        let (rows, cols) = nodes[p].value.shape();
                        let gp = Tensor::from_fn(rows, cols, |r, c| g.get(r, at + c));
                        at += cols;
                        accumulate(&mut grads, p, gp);
                    }
                }
                Op::MinList(parts) => {
                    // Per coordinate, the first attaining part takes the gradient.
                    let (rows, cols) = node.value.shape();
                    for r in 0..rows {
                        for c in 0..cols {
                            let out = node.value.get(r, c);
                            for &p in parts {
                                if nodes[p].value.get(r, c) == out {
                                    let mut gp = Tensor::zeros(rows, cols);
                                    gp.set(r, c, g.get(r, c));
                                    accumulate(&mut grads, p, gp);
                                    break;
                                }
                            }
                        }
                    }
                }
            }
            grads[id] = Some(g);
        }
        Ok(grads)
    }
}

fn accumulate<F: Scalar>(grads: &mut [Option<Tensor<F>>], id: usize, g: Tensor<F>) {
    match &mut grads[id] {
        Some(acc) => *acc = acc.add(&g).unwrap(),
        slot => *slot = Some(g),
    }
}

impl<'t, F: Scalar> Var<'t, F> {
    pub fn shape(&self) -> (usize, usize) {
        self.tape.shape(self.id)
    }

    pub fn value(&self) -> Tensor<F> {
        self.tape.value(*self)
    }

    pub fn item(&self) -> NumResult<F> {
        self.value().item()
    }

    fn binary(
        self,
        rhs: Var<'t, F>,
        op: fn(usize, usize) -> Op,
        f: fn(&Tensor<F>, &Tensor<F>) -> NumResult<Tensor<F>>,
    ) -> NumResult<Var<'t, F>> {
        let value = {
            let nodes = self.tape.nodes.borrow();
            f(&nodes[self.id].value, &nodes[rhs.id].value)?
        };
        Ok(self.tape.push(value, op(self.id, rhs.id)))
    }

    // fallible arithmetic cannot satisfy the std::ops signatures
    #[allow(clippy::should_implement_trait)]
    pub fn add(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        self.binary(rhs, Op::Add, |a, b| a.add(b))
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        self.binary(rhs, Op::Sub, |a, b| a.sub(b))
    }

    pub fn mul_elem(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        self.binary(rhs, Op::MulElem, |a, b| a.mul_elem(b))
    }

    pub fn div_elem(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        self.binary(rhs, Op::DivElem, |a, b| a.div_elem(b))
    }

    pub fn matmul(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        self.binary(rhs, Op::MatMul, |a, b| a.matmul(b))
    }

    pub fn sigmoid(self) -> Var<'t, F> {
        let value = self.value().sigmoid();
        self.tape.push(value, Op::Sigmoid(self.id))
    }

    pub fn relu(self) -> Var<'t, F> {
        let value = self.value().relu();
        self.tape.push(value, Op::Relu(self.id))
    }

    pub fn abs(self) -> Var<'t, F> {
        let value = self.value().abs();
        self.tape.push(value, Op::Abs(self.id))
    }

    pub fn exp(self) -> Var<'t, F> {
        let value = self.value().exp();
        self.tape.push(value, Op::Exp(self.id))
    }

    pub fn scale(self, k: F) -> Var<'t, F> {
        let value = self.value().scale(k);
        self.tape.push_with_factor(value, Op::Scale(self.id), k)
    }

    pub fn mean_cols(self) -> Var<'t, F> {
        let value = self.value().mean_cols();
        self.tape.push(value, Op::MeanCols(self.id))
    }

    pub fn max_cols(self) -> Var<'t, F> {
        let value = self.value().max_cols();
        self.tape.push(value, Op::MaxCols(self.id))
    }

    pub fn sum_all(self) -> Var<'t, F> {
        let value = Tensor::scalar(self.value().sum_all());
        self.tape.push(value, Op::SumAll(self.id))
    }

    pub fn broadcast_cols(self, n: usize) -> NumResult<Var<'t, F>> {
        let value = self.value().broadcast_cols(n)?;
        Ok(self.tape.push(value, Op::BroadcastCols(self.id)))
    }

    /// Sum of absolute differences, as a 1x1 tape node.
    pub fn l1_distance(self, rhs: Var<'t, F>) -> NumResult<Var<'t, F>> {
        Ok(self.sub(rhs)?.abs().sum_all())
    }
}

/// Stack vars vertically.
pub fn concat_rows<'t, F: Scalar>(parts: &[Var<'t, F>]) -> NumResult<Var<'t, F>> {
    let first = parts
        .first()
        .ok_or(NumError::EmptyList { op: "concat_rows" })?;
    let tape = first.tape;
    let value = {
        let nodes = tape.nodes.borrow();
        let tensors: Vec<&Tensor<F>> = parts.iter().map(|v| &nodes[v.id].value).collect();
        Tensor::concat_rows(&tensors)?
    };
    Ok(tape.push(value, Op::ConcatRows(parts.iter().map(|v| v.id).collect())))
}

/// Stack vars horizontally (column vectors into a matrix).
pub fn concat_cols<'t, F: Scalar>(parts: &[Var<'t, F>]) -> NumResult<Var<'t, F>> {
    let first = parts
        .first()
        .ok_or(NumError::EmptyList { op: "concat_cols" })?;
    let tape = first.tape;
    let value = {
        let nodes = tape.nodes.borrow();
        let tensors: Vec<&Tensor<F>> = parts.iter().map(|v| &nodes[v.id].value).collect();
        Tensor::concat_cols(&tensors)?
    };
    Ok(tape.push(value, Op::ConcatCols(parts.iter().map(|v| v.id).collect())))
}

/// Elementwise minimum across a list of same-shape vars.
pub fn min_list<'t, F: Scalar>(parts: &[Var<'t, F>]) -> NumResult<Var<'t, F>> {
    let first = parts
        .first()
        .ok_or(NumError::EmptyList { op: "min_list" })?;
    let tape = first.tape;
    let value = {
        let nodes = tape.nodes.borrow();
        let shape = nodes[first.id].value.shape();
        for p in parts {
            let s = nodes[p.id].value.shape();
            if s != shape {
                return Err(NumError::ShapeMismatch {
                    op: "min_list",
                    lhs: shape,
                    rhs: s,
                });
            }
        }
        let mut out = nodes[first.id].value.clone();
        for p in &parts[1..] {
            let v = &nodes[p.id].value;
            for (o, &x) in out.data_mut().iter_mut().zip(v.data().iter()) {
                if x < *o {
                    *o = x;
                }
            }
        }
        out
    };
    Ok(tape.push(value, Op::MinList(parts.iter().map(|v| v.id).collect())))
}

/// Elementwise softmax across a list of same-shape vars: per coordinate, the
/// returned weights sum to one. The stabilizing shift is a constant, which
/// leaves the derivative unchanged.
pub fn softmax_list<'t, F: Scalar>(parts: &[Var<'t, F>]) -> NumResult<Vec<Var<'t, F>>> {
    let first = parts
        .first()
        .ok_or(NumError::EmptyList { op: "softmax_list" })?;
    let tape = first.tape;
    let peak = {
        let nodes = tape.nodes.borrow();
        let shape = nodes[first.id].value.shape();
        for p in parts {
            let s = nodes[p.id].value.shape();
            if s != shape {
                return Err(NumError::ShapeMismatch {
                    op: "softmax_list",
                    lhs: shape,
                    rhs: s,
                });
            }
        }
        let mut peak = nodes[first.id].value.clone();
        for p in &parts[1..] {
            for (m, &v) in peak
                .data_mut()
                .iter_mut()
                .zip(nodes[p.id].value.data().iter())
            {
                if v > *m {
                    *m = v;
                }
            }
        }
        peak
    };
    let shift = tape.constant(peak);
    let exps: Vec<Var<'t, F>> = parts
        .iter()
        .map(|p| p.sub(shift).map(|d| d.exp()))
        .collect::<NumResult<_>>()?;
    let mut denom = exps[0];
    for e in &exps[1..] {
        denom = denom.add(*e)?;
    }
    exps.into_iter().map(|e| e.div_elem(denom)).collect()
}
