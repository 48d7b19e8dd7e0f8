//! Minibatch training of the query engine.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, SplitGraphs};
use crate::qe::{self, batch_loss, ModelConfig, ModelMeta, QeError, QueryModel};
use crate::query::{serialize_queries, QueryError, QueryInstance, QuerySet, Regime};
use crate::typegraph::{build_type_graph, TypeGraph};
use crate::{ParameterStore, Real, Tape, Tensor};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Qe(#[from] QeError),

    #[error(transparent)]
    Num(#[from] crate::numcore::NumError),

    #[error(transparent)]
    Query(#[from] QueryError),

    #[error("invalid training configuration: {0}")]
    Config(String),

    #[error("loss became non-finite at step {step}; offending batch saved to {batch_path}")]
    NonFiniteLoss { step: usize, batch_path: PathBuf },

    #[error("query has no negative candidates: every entity is an answer")]
    NoNegatives,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type TrainResult<T> = Result<T, TrainError>;

/// Optimization hyperparameters. Benchmark-scale batch size is 512; the
/// default here is desk-scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub learning_rate: Real,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub regime: Regime,
}

fn default_lr() -> Real {
    1e-4
}

fn default_batch() -> usize {
    64
}

fn default_steps() -> usize {
    1000
}

fn default_log_every() -> usize {
    50
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: default_lr(),
            batch_size: default_batch(),
            steps: default_steps(),
            seed: 0,
            log_every: default_log_every(),
            regime: Regime::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> TrainResult<()> {
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch_size must be positive".into()));
        }
        if self.steps == 0 {
            return Err(TrainError::Config("steps must be positive".into()));
        }
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(TrainError::Config(
                "learning_rate must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with lazy updates: parameters whose gradient is identically zero in
/// a step are skipped entirely (no moment decay, no step), so sparse
/// embedding tables only move when they are part of the batch.
pub struct Adam {
    lr: Real,
    beta1: Real,
    beta2: Real,
    eps: Real,
    first: HashMap<String, Tensor>,
    second: HashMap<String, Tensor>,
    steps: HashMap<String, u32>,
}

impl Adam {
    pub fn new(lr: Real) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            first: HashMap::new(),
            second: HashMap::new(),
            steps: HashMap::new(),
        }
    }

    pub fn step(&mut self, store: &mut ParameterStore) {
        let lr = self.lr;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        store.update_each(|name, value, grad| {
            if grad.data().iter().all(|&g| g == 0.0) {
                return;
            }
            let (rows, cols) = grad.shape();
            let m = self
                .first
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(rows, cols));
            let v = self
                .second
                .entry(name.to_string())
                .or_insert_with(|| Tensor::zeros(rows, cols));
            let t = self.steps.entry(name.to_string()).or_insert(0);
            *t += 1;
            let bc1 = 1.0 - b1.powi(*t as i32);
            let bc2 = 1.0 - b2.powi(*t as i32);
            for i in 0..grad.data().len() {
                let g = grad.data()[i];
                let mi = b1 * m.data()[i] + (1.0 - b1) * g;
                let vi = b2 * v.data()[i] + (1.0 - b2) * g * g;
                m.data_mut()[i] = mi;
                v.data_mut()[i] = vi;
                let m_hat = mi / bc1;
                let v_hat = vi / bc2;
                value.data_mut()[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        });
    }
}

/// Artifacts of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub checkpoint_dir: PathBuf,
    pub loss_curve: Vec<(usize, Real)>,
    pub initial_loss: Real,
    pub final_loss: Real,
}

/// Graphs a regime trains against: the type graph is derived from the
/// training graph so held-out edges cannot leak type information.
pub fn training_graphs(
    splits: &SplitGraphs,
    regime: Regime,
) -> (&crate::kg::KnowledgeGraph, TypeGraph) {
    let answer_graph = match regime {
        Regime::Deductive => &splits.test,
        Regime::Generalization | Regime::Inductive => &splits.train,
    };
    (answer_graph, build_type_graph(answer_graph))
}

/// Run the minibatch loop and write `checkpoint/` plus `loss_curve.csv`
/// under `out_dir`. Deterministic for a fixed seed.
pub fn train(
    splits: &SplitGraphs,
    queries: &QuerySet,
    tconfig: &TrainConfig,
    mconfig: &ModelConfig,
    out_dir: &Path,
) -> TrainResult<TrainOutcome> {
    tconfig.validate()?;
    mconfig.validate()?;
    if queries.is_empty() {
        return Err(TrainError::Config("no training queries".into()));
    }

    let (answer_graph, tg) = training_graphs(splits, tconfig.regime);
    // vocabulary comes from the shared full graph
    let kg = &splits.test;
    let model = QueryModel::new(kg, &tg, mconfig);

    let negative_pool: Vec<EntityId> = answer_graph.edge_entities().into_iter().collect();
    let mut store = ParameterStore::init(&qe::param_specs(kg, mconfig), tconfig.seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(tconfig.seed.wrapping_add(1));
    let mut adam = Adam::new(tconfig.learning_rate);

    fs::create_dir_all(out_dir).map_err(|e| TrainError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let mut curve: Vec<(usize, Real)> = Vec::new();
    let mut initial_loss = Real::NAN;
    for step in 1..=tconfig.steps {
        let batch = sample_batch(
            queries,
            tconfig.batch_size,
            &negative_pool,
            mconfig,
            &mut rng,
        )?;

        let tape = Tape::new();
        let items: Vec<(&crate::query::QueryDag, EntityId, &[EntityId])> = batch
            .iter()
            .map(|(q, pos, negs)| (&q.dag, *pos, negs.as_slice()))
            .collect();
        let loss = batch_loss(&tape, &store, model, &items)?;
        let loss_value = loss.item()?;
        if !loss_value.is_finite() {
            let batch_path = out_dir.join("nan_batch.jsonl");
            let mut dump = QuerySet::new(queries.regime);
            dump.queries = batch.iter().map(|(q, _, _)| (*q).clone()).collect();
            serialize_queries(&dump, &batch_path)?;
            return Err(TrainError::NonFiniteLoss { step, batch_path });
        }
        if step == 1 {
            initial_loss = loss_value;
        }
        if step % tconfig.log_every == 0 || step == 1 || step == tconfig.steps {
            curve.push((step, loss_value));
        }

        tape.backward(loss, &mut store)?;
        adam.step(&mut store);
    }

    let curve_path = out_dir.join("loss_curve.csv");
    let mut csv = String::from("step,loss\n");
    for (step, loss) in &curve {
        csv.push_str(&format!("{step},{loss}\n"));
    }
    fs::write(&curve_path, csv).map_err(|e| TrainError::Io {
        path: curve_path.clone(),
        source: e,
    })?;

    let checkpoint_dir = out_dir.join("checkpoint");
    let meta = ModelMeta {
        schema_version: 1,
        config: mconfig.clone(),
        regime: tconfig.regime,
        seed: tconfig.seed,
    };
    qe::save_checkpoint(&checkpoint_dir, &store, &meta)?;

    Ok(TrainOutcome {
        checkpoint_dir,
        loss_curve: curve.clone(),
        initial_loss,
        final_loss: curve.last().map(|(_, l)| *l).unwrap_or(initial_loss),
    })
}

type BatchItem<'q> = (&'q QueryInstance, EntityId, Vec<EntityId>);

/// Uniformly sample queries, one positive answer each, and filtered uniform
/// negatives from the training-entity pool.
fn sample_batch<'q>(
    queries: &'q QuerySet,
    batch_size: usize,
    pool: &[EntityId],
    mconfig: &ModelConfig,
    rng: &mut ChaCha8Rng,
) -> TrainResult<Vec<BatchItem<'q>>> {
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size {
        let q = &queries.queries[rng.random_range(0..queries.len())];
        let answers: Vec<EntityId> = q.answers.iter().copied().collect();
        let pos = answers[rng.random_range(0..answers.len())];
        let candidates: Vec<EntityId> = pool
            .iter()
            .copied()
            .filter(|e| !q.answers.contains(e))
            .collect();
        if candidates.is_empty() {
            return Err(TrainError::NoNegatives);
        }
        let negs: Vec<EntityId> = (0..mconfig.negative_samples.max(1))
            .map(|_| candidates[rng.random_range(0..candidates.len())])
            .collect();
        batch.push((q, pos, negs));
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::load_splits;
    use crate::qe::TempMode;
    use crate::query::{generate_training_queries, Structure};
    use std::path::Path;

    fn toy_splits(dir: &Path) -> SplitGraphs {
        // a ring of typed entities with two relations
        let mut train = String::new();
        let mut types = String::new();
        for i in 0..12 {
            let a = format!("e{i}");
            let b = format!("e{}", (i + 1) % 12);
            let c = format!("e{}", (i + 5) % 12);
            train.push_str(&format!("{a}\tnext\t{b}\n"));
            train.push_str(&format!("{a}\tjump\t{c}\n"));
            types.push_str(&format!("e{i}\tt{}\n", i % 3));
        }
        std::fs::write(dir.join("train.tsv"), &train).unwrap();
        std::fs::write(dir.join("valid.tsv"), "").unwrap();
        std::fs::write(dir.join("test.tsv"), "").unwrap();
        std::fs::write(dir.join("types.tsv"), &types).unwrap();
        load_splits(dir).unwrap()
    }

    fn desk_configs(steps: usize, lr: Real, seed: u64) -> (TrainConfig, ModelConfig) {
        (
            TrainConfig {
                learning_rate: lr,
                batch_size: 8,
                steps,
                seed,
                log_every: 10,
                regime: Regime::Deductive,
            },
            ModelConfig {
                dim: 8,
                temp: TempMode::Both,
                margin: 4.0,
                negative_samples: 4,
                ..Default::default()
            },
        )
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let dir = tempfile::tempdir().unwrap();
        let splits = toy_splits(dir.path());
        let queries =
            generate_training_queries(&splits, Structure::OneP, 10, Regime::Deductive, 3).unwrap();
        let (tconfig, mconfig) = desk_configs(1, 0.0, 3);

        let before =
            ParameterStore::init(&qe::param_specs(&splits.test, &mconfig), tconfig.seed).unwrap();
        let out = dir.path().join("run");
        let outcome = train(&splits, &queries, &tconfig, &mconfig, &out).unwrap();
        let (after, _) = qe::load_checkpoint(&outcome.checkpoint_dir).unwrap();
        for (name, value, _) in before.iter() {
            assert_eq!(value, after.value(name).unwrap(), "{name} changed");
        }
    }

    #[test]
    fn toy_run_halves_the_initial_loss() {
        let dir = tempfile::tempdir().unwrap();
        let splits = toy_splits(dir.path());
        let queries =
            generate_training_queries(&splits, Structure::OneP, 30, Regime::Deductive, 5).unwrap();
        let (tconfig, mconfig) = desk_configs(500, 5e-3, 5);
        let out = dir.path().join("run");
        let outcome = train(&splits, &queries, &tconfig, &mconfig, &out).unwrap();
        assert!(
            outcome.final_loss < 0.5 * outcome.initial_loss,
            "loss {} -> {}",
            outcome.initial_loss,
            outcome.final_loss
        );
        // loss stayed finite at every logged step
        assert!(outcome.loss_curve.iter().all(|(_, l)| l.is_finite()));
        // curve file exists with the csv header
        let csv = std::fs::read_to_string(out.join("loss_curve.csv")).unwrap();
        assert!(csv.starts_with("step,loss\n"));
    }

    #[test]
    fn same_seed_gives_bit_identical_checkpoints() {
        let dir = tempfile::tempdir().unwrap();
        let splits = toy_splits(dir.path());
        let queries =
            generate_training_queries(&splits, Structure::OneP, 10, Regime::Deductive, 7).unwrap();
        let (tconfig, mconfig) = desk_configs(20, 1e-3, 7);

        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        train(&splits, &queries, &tconfig, &mconfig, &out_a).unwrap();
        train(&splits, &queries, &tconfig, &mconfig, &out_b).unwrap();
        let bytes_a = std::fs::read(out_a.join("checkpoint/params.f64")).unwrap();
        let bytes_b = std::fs::read(out_b.join("checkpoint/params.f64")).unwrap();
        assert_eq!(bytes_a, bytes_b);
    }

    #[test]
    fn non_finite_loss_aborts_and_dumps_the_batch() {
        let dir = tempfile::tempdir().unwrap();
        let splits = toy_splits(dir.path());
        let queries =
            generate_training_queries(&splits, Structure::OneP, 5, Regime::Deductive, 13).unwrap();
        let (tconfig, mut mconfig) = desk_configs(10, 1e-3, 13);
        // an infinite margin makes the very first hinge non-finite
        mconfig.margin = f64::INFINITY;
        let out = dir.path().join("run");
        match train(&splits, &queries, &tconfig, &mconfig, &out) {
            Err(TrainError::NonFiniteLoss { step, batch_path }) => {
                assert_eq!(step, 1);
                assert!(batch_path.exists());
                let dumped = crate::query::load_queries(&batch_path).unwrap();
                assert!(!dumped.is_empty());
            }
            other => panic!("expected non-finite abort, got {other:?}"),
        }
    }

    #[test]
    fn optimizer_skips_parameters_without_gradients() {
        let dir = tempfile::tempdir().unwrap();
        let splits = toy_splits(dir.path());
        // single training query: only its anchor/answer entities get updates
        let queries =
            generate_training_queries(&splits, Structure::OneP, 1, Regime::Deductive, 11).unwrap();
        let (mut tconfig, mut mconfig) = desk_configs(1, 1e-2, 11);
        tconfig.batch_size = 1;
        mconfig.temp = TempMode::Off;
        mconfig.negative_samples = 1;

        let before =
            ParameterStore::init(&qe::param_specs(&splits.test, &mconfig), tconfig.seed).unwrap();
        let out = dir.path().join("run");
        let outcome = train(&splits, &queries, &tconfig, &mconfig, &out).unwrap();
        let (after, _) = qe::load_checkpoint(&outcome.checkpoint_dir).unwrap();

        let mut touched = 0;
        let mut untouched = 0;
        for (name, value, _) in before.iter() {
            if name.starts_with("ent.") {
                if value == after.value(name).unwrap() {
                    untouched += 1;
                } else {
                    touched += 1;
                }
            }
        }
        // the anchor and sampled entities move; the rest stay bit-identical
        assert!(touched >= 2, "at least positive and negative move");
        assert!(untouched > 0, "entities outside the batch must not move");
    }
}
