use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::error::{NumError, NumResult};
use super::scalar::Scalar;
use super::tensor::Tensor;

/// How a parameter tensor is filled at initialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Uniform in `(-1/sqrt(fan_in), 1/sqrt(fan_in))` with fan-in taken from
    /// the tensor's column count (row count for column vectors).
    Uniform,
    Zeros,
}

/// Declaration of one learnable tensor.
#[derive(Debug, Clone)]
pub struct ParamSpec {
    pub name: String,
    pub shape: (usize, usize),
    pub scheme: InitScheme,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, shape: (usize, usize), scheme: InitScheme) -> Self {
        ParamSpec {
            name: name.into(),
            shape,
            scheme,
        }
    }
}

/// Named learnable tensors plus matching gradient slots.
///
/// Iteration order is insertion order, which keeps optimizer updates and
/// checkpoint layout deterministic.
#[derive(Clone, Debug)]
pub struct ParameterStore<F: Scalar> {
    names: Vec<String>,
    index: HashMap<String, usize>,
    values: Vec<Tensor<F>>,
    grads: Vec<Tensor<F>>,
    seed: u64,
}

impl<F: Scalar> ParameterStore<F> {
    /// Build a store from parameter declarations, deterministically under `seed`.
    pub fn init(specs: &[ParamSpec], seed: u64) -> NumResult<Self> {
        let mut store = ParameterStore {
            names: Vec::with_capacity(specs.len()),
            index: HashMap::with_capacity(specs.len()),
            values: Vec::with_capacity(specs.len()),
            grads: Vec::with_capacity(specs.len()),
            seed,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for spec in specs {
            if store.index.contains_key(&spec.name) {
                return Err(NumError::DuplicateParameter(spec.name.clone()));
            }
            let (rows, cols) = spec.shape;
            let value = match spec.scheme {
                InitScheme::Zeros => Tensor::zeros(rows, cols),
                InitScheme::Uniform => {
                    let fan_in = if cols > 1 { cols } else { rows };
                    let bound = 1.0 / (fan_in as f64).sqrt();
                    Tensor::from_fn(rows, cols, |_, _| {
                        F::from_f64_lossy(rng.random_range(-bound..bound))
                    })
                }
            };
            store.index.insert(spec.name.clone(), store.names.len());
            store.names.push(spec.name.clone());
            store.grads.push(Tensor::zeros(rows, cols));
            store.values.push(value);
        }
        Ok(store)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    /// Parameter names in insertion order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(|s| s.as_str())
    }

    fn idx(&self, name: &str) -> NumResult<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| NumError::UnknownParameter(name.to_string()))
    }

    pub fn value(&self, name: &str) -> NumResult<&Tensor<F>> {
        Ok(&self.values[self.idx(name)?])
    }

    pub fn set_value(&mut self, name: &str, value: Tensor<F>) -> NumResult<()> {
        let i = self.idx(name)?;
        self.values[i] = value;
        Ok(())
    }

    pub fn grad(&self, name: &str) -> NumResult<&Tensor<F>> {
        Ok(&self.grads[self.idx(name)?])
    }

    pub fn set_grad(&mut self, name: &str, grad: Tensor<F>) -> NumResult<()> {
        let i = self.idx(name)?;
        self.grads[i] = grad;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            let (r, c) = g.shape();
            *g = Tensor::zeros(r, c);
        }
    }

    /// Visit `(name, value, grad)` in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<F>, &Tensor<F>)> {
        self.names
            .iter()
            .enumerate()
            .map(move |(i, n)| (n.as_str(), &self.values[i], &self.grads[i]))
    }

    /// Apply `update(name, value, grad)` to every parameter in insertion order.
    pub fn update_each(&mut self, mut update: impl FnMut(&str, &mut Tensor<F>, &Tensor<F>)) {
        for i in 0..self.names.len() {
            update(&self.names[i], &mut self.values[i], &self.grads[i]);
        }
    }

    /// Write the store as `manifest.json` plus `params.f64` (raw little-endian
    /// f64 in manifest order) inside `dir`.
    pub fn save(&self, dir: &Path) -> NumResult<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut tensors = Vec::with_capacity(self.names.len());
        let mut offset = 0usize;
        for (i, name) in self.names.iter().enumerate() {
            let (rows, cols) = self.values[i].shape();
            tensors.push(TensorEntry {
                name: name.clone(),
                rows,
                cols,
                offset,
            });
            offset += rows * cols;
        }
        let manifest = CheckpointManifest {
            schema_version: 1,
            seed: self.seed,
            total_len: offset,
            tensors,
        };
        let manifest_path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&manifest_path, json).map_err(|e| io_err(&manifest_path, e))?;

        let bin_path = dir.join("params.f64");
        let mut bytes = Vec::with_capacity(offset * 8);
        for value in &self.values {
            for &v in value.data() {
                let as64 = v.to_f64().expect("scalar converts to f64");
                bytes.extend_from_slice(&as64.to_le_bytes());
            }
        }
        let mut file = fs::File::create(&bin_path).map_err(|e| io_err(&bin_path, e))?;
        file.write_all(&bytes).map_err(|e| io_err(&bin_path, e))?;
        Ok(())
    }

    /// Load a store written by [`ParameterStore::save`].
    pub fn load(dir: &Path) -> NumResult<Self> {
        let manifest_path = dir.join("manifest.json");
        let json = fs::read_to_string(&manifest_path).map_err(|e| io_err(&manifest_path, e))?;
        let manifest: CheckpointManifest =
            serde_json::from_str(&json).map_err(|e| NumError::CheckpointFormat {
                path: manifest_path.display().to_string(),
                reason: e.to_string(),
            })?;
        if manifest.schema_version != 1 {
            return Err(NumError::CheckpointFormat {
                path: manifest_path.display().to_string(),
                reason: format!("unsupported schema version {}", manifest.schema_version),
            });
        }

        let bin_path = dir.join("params.f64");
        let mut bytes = Vec::new();
        fs::File::open(&bin_path)
            .map_err(|e| io_err(&bin_path, e))?
            .read_to_end(&mut bytes)
            .map_err(|e| io_err(&bin_path, e))?;
        if bytes.len() != manifest.total_len * 8 {
            return Err(NumError::CheckpointFormat {
                path: bin_path.display().to_string(),
                reason: format!(
                    "expected {} bytes, found {}",
                    manifest.total_len * 8,
                    bytes.len()
                ),
            });
        }

        let mut store = ParameterStore {
            names: Vec::with_capacity(manifest.tensors.len()),
            index: HashMap::with_capacity(manifest.tensors.len()),
            values: Vec::with_capacity(manifest.tensors.len()),
            grads: Vec::with_capacity(manifest.tensors.len()),
            seed: manifest.seed,
        };
        for entry in &manifest.tensors {
            if store.index.contains_key(&entry.name) {
                return Err(NumError::DuplicateParameter(entry.name.clone()));
            }
            let len = entry.rows * entry.cols;
            let start = entry.offset * 8;
            let end = start + len * 8;
            if end > bytes.len() {
                return Err(NumError::CheckpointFormat {
                    path: bin_path.display().to_string(),
                    reason: format!("tensor `{}` extends past end of data", entry.name),
                });
            }
            let data: Vec<F> = bytes[start..end]
                .chunks_exact(8)
                .map(|b| F::from_f64_lossy(f64::from_le_bytes(b.try_into().unwrap())))
                .collect();
            store.index.insert(entry.name.clone(), store.names.len());
            store.names.push(entry.name.clone());
            store.grads.push(Tensor::zeros(entry.rows, entry.cols));
            store
                .values
                .push(Tensor::from_vec(entry.rows, entry.cols, data));
        }
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointManifest {
    schema_version: u32,
    seed: u64,
    total_len: usize,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    offset: usize,
}

fn io_err(path: &Path, source: std::io::Error) -> NumError {
    NumError::CheckpointIo {
        path: path.display().to_string(),
        source,
    }
}
