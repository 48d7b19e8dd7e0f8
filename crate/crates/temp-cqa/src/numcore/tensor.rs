use super::error::{NumError, NumResult};
use super::scalar::Scalar;

/// Dense row-major matrix of scalars. Column vectors are `d x 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<F> {
    rows: usize,
    cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![F::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<F>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must match shape");
        Tensor { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Tensor { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Tensor::from_fn(n, n, |r, c| if r == c { F::one() } else { F::zero() })
    }

    /// Column vector from a slice.
    pub fn col(values: &[F]) -> Self {
        Tensor {
            rows: values.len(),
            cols: 1,
            data: values.to_vec(),
        }
    }

    pub fn scalar(v: F) -> Self {
        Tensor {
            rows: 1,
            cols: 1,
            data: vec![v],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> F {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: F) {
        self.data[r * self.cols + c] = v;
    }

    /// Value of a 1x1 tensor.
    pub fn item(&self) -> NumResult<F> {
        if self.shape() != (1, 1) {
            return Err(NumError::NotScalar {
                op: "item",
                shape: self.shape(),
            });
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    fn same_shape(&self, rhs: &Self, op: &'static str) -> NumResult<()> {
        if self.shape() != rhs.shape() {
            return Err(NumError::ShapeMismatch {
                op,
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, rhs: &Self, op: &'static str, f: impl Fn(F, F) -> F) -> NumResult<Self> {
        self.same_shape(rhs, op)?;
        let data = self
            .data
            .iter()
            .zip(rhs.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn map(&self, f: impl Fn(F) -> F) -> Self {
        Tensor {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add(&self, rhs: &Self) -> NumResult<Self> {
        self.zip_with(rhs, "add", |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> NumResult<Self> {
        self.zip_with(rhs, "sub", |a, b| a - b)
    }

    pub fn mul_elem(&self, rhs: &Self) -> NumResult<Self> {
        self.zip_with(rhs, "mul_elem", |a, b| a * b)
    }

    pub fn div_elem(&self, rhs: &Self) -> NumResult<Self> {
        self.zip_with(rhs, "div_elem", |a, b| a / b)
    }

    pub fn scale(&self, k: F) -> Self {
        self.map(|v| v * k)
    }

    pub fn matmul(&self, rhs: &Self) -> NumResult<Self> {
        if self.cols != rhs.rows {
            return Err(NumError::ShapeMismatch {
                op: "matmul",
                lhs: self.shape(),
                rhs: rhs.shape(),
            });
        }
        let mut out = Tensor::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == F::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.data[k * rhs.cols + j];
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        Tensor::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    pub fn sigmoid(&self) -> Self {
        self.map(|v| F::one() / (F::one() + (-v).exp()))
    }

    pub fn relu(&self) -> Self {
        self.map(|v| if v > F::zero() { v } else { F::zero() })
    }

    pub fn abs(&self) -> Self {
        self.map(|v| v.abs())
    }

    pub fn exp(&self) -> Self {
        self.map(|v| v.exp())
    }

    /// Mean over columns: `r x c` -> `r x 1`.
    pub fn mean_cols(&self) -> Self {
        let inv = F::from_f64_lossy(1.0 / self.cols as f64);
        Tensor::from_fn(self.rows, 1, |r, _| {
            let mut acc = F::zero();
            for c in 0..self.cols {
                acc += self.get(r, c);
            }
            acc * inv
        })
    }

    /// Elementwise max over columns: `r x c` -> `r x 1`. Ties pick the leftmost column.
    pub fn max_cols(&self) -> Self {
        Tensor::from_fn(self.rows, 1, |r, _| {
            let mut best = self.get(r, 0);
            for c in 1..self.cols {
                let v = self.get(r, c);
                if v > best {
                    best = v;
                }
            }
            best
        })
    }

    pub fn sum_all(&self) -> F {
        let mut acc = F::zero();
        for &v in &self.data {
            acc += v;
        }
        acc
    }

    /// Repeat a column vector `r x 1` across `n` columns.
    pub fn broadcast_cols(&self, n: usize) -> NumResult<Self> {
        if self.cols != 1 {
            return Err(NumError::ShapeMismatch {
                op: "broadcast_cols",
                lhs: self.shape(),
                rhs: (self.rows, n),
            });
        }
        Ok(Tensor::from_fn(self.rows, n, |r, _| self.data[r]))
    }

    /// Stack tensors vertically (same column count).
    pub fn concat_rows(parts: &[&Tensor<F>]) -> NumResult<Self> {
        let first = parts
            .first()
            .ok_or(NumError::EmptyList { op: "concat_rows" })?;
        let cols = first.cols;
        let mut rows = 0;
        for p in parts {
            if p.cols != cols {
                return Err(NumError::ShapeMismatch {
                    op: "concat_rows",
                    lhs: first.shape(),
                    rhs: p.shape(),
                });
            }
            rows += p.rows;
        }
        let mut data = Vec::with_capacity(rows * cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Tensor { rows, cols, data })
    }

    /// Stack column vectors / matrices horizontally (same row count).
    pub fn concat_cols(parts: &[&Tensor<F>]) -> NumResult<Self> {
        let first = parts
            .first()
            .ok_or(NumError::EmptyList { op: "concat_cols" })?;
        let rows = first.rows;
        let mut cols = 0;
        for p in parts {
            if p.rows != rows {
                return Err(NumError::ShapeMismatch {
                    op: "concat_cols",
                    lhs: first.shape(),
                    rhs: p.shape(),
                });
            }
            cols += p.cols;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut at = 0;
            for p in parts {
                for c in 0..p.cols {
                    out.data[r * cols + at + c] = p.data[r * p.cols + c];
                }
                at += p.cols;
            }
        }
        Ok(out)
    }

    /// Sum of absolute differences.
    pub fn l1_distance(&self, rhs: &Self) -> NumResult<F> {
        self.same_shape(rhs, "l1_distance")?;
        let mut acc = F::zero();
        for (&a, &b) in self.data.iter().zip(rhs.data.iter()) {
            acc += (a - b).abs();
        }
        Ok(acc)
    }

    /// Elementwise softmax across a list of same-shape tensors: for every
    /// coordinate, weights over the list sum to one. Max-shifted for stability.
    pub fn softmax_list(parts: &[&Tensor<F>]) -> NumResult<Vec<Tensor<F>>> {
        let first = parts
            .first()
            .ok_or(NumError::EmptyList { op: "softmax_list" })?;
        for p in parts {
            first.same_shape(p, "softmax_list")?;
        }
        let len = first.data.len();
        let mut peak = first.data.clone();
        for p in &parts[1..] {
            for (m, &v) in peak.iter_mut().zip(p.data.iter()) {
                if v > *m {
                    *m = v;
                }
            }
        }
        let exps: Vec<Vec<F>> = parts
            .iter()
            .map(|p| {
                p.data
                    .iter()
                    .zip(peak.iter())
                    .map(|(&v, &m)| (v - m).exp())
                    .collect()
            })
            .collect();
        let mut denom = vec![F::zero(); len];
        for e in &exps {
            for (d, &v) in denom.iter_mut().zip(e.iter()) {
                *d += v;
            }
        }
        Ok(exps
            .into_iter()
            .map(|e| Tensor {
                rows: first.rows,
                cols: first.cols,
                data: e.iter().zip(denom.iter()).map(|(&v, &d)| v / d).collect(),
            })
            .collect())
    }
}
