//! Knowledge-graph ingestion, storage, and train/valid/test splits.
//!
//! Graphs are read from tab-separated files: one `head\trelation\ttail` per
//! line for relation assertions, one `entity\ttype` per line for type
//! assertions. Lines starting with `#` and blank lines are ignored. All
//! vocabularies get dense integer ids in first-appearance order, so loading
//! is deterministic.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved type id for entities without type assertions and for relations
/// whose head/tail type intersection comes up empty. Always id 0, so it
/// sorts before every file-provided type.
pub const UNKNOWN_TYPE: TypeId = TypeId(0);
pub const UNKNOWN_TYPE_NAME: &str = "__unknown__";

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub usize);

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_newtype!(
    /// Dense entity id.
    EntityId
);
id_newtype!(
    /// Dense relation id.
    RelationId
);
id_newtype!(
    /// Dense type id.
    TypeId
);

/// A `(head, relation, tail)` assertion.
pub type Triple = (EntityId, RelationId, EntityId);

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: expected {expected} tab-separated fields, found {found}")]
    Parse {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("missing split file {0}")]
    MissingFile(PathBuf),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("entity id {0} out of range")]
    EntityIdRange(usize),

    #[error("vocabulary manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
}

pub type KgResult<T> = Result<T, KgError>;

/// Name-to-dense-id symbol table.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    ids: HashMap<String, usize>,
}

impl Vocab {
    fn new() -> Self {
        Vocab::default()
    }

    fn intern(&mut self, name: &str) -> usize {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len();
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: usize) -> Option<&str> {
        self.names.get(id).map(|s| s.as_str())
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// An immutable knowledge graph: entity/relation/type vocabularies, relation
/// assertions, and entity-type assertions, plus adjacency indexes for query
/// evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    relation_assertions: BTreeSet<Triple>,
    type_assertions: BTreeSet<(EntityId, TypeId)>,
    // (head, relation) -> tails, for forward projection
    out_index: BTreeMap<(EntityId, RelationId), Vec<EntityId>>,
    // tail -> (head, relation), for reverse sampling walks
    in_index: BTreeMap<EntityId, Vec<(EntityId, RelationId)>>,
    // entity -> sorted types
    types_index: BTreeMap<EntityId, Vec<TypeId>>,
}

impl KnowledgeGraph {
    fn from_parts(
        entities: Vocab,
        relations: Vocab,
        types: Vocab,
        relation_assertions: BTreeSet<Triple>,
        type_assertions: BTreeSet<(EntityId, TypeId)>,
    ) -> Self {
        let mut out_index: BTreeMap<(EntityId, RelationId), Vec<EntityId>> = BTreeMap::new();
        let mut in_index: BTreeMap<EntityId, Vec<(EntityId, RelationId)>> = BTreeMap::new();
        for &(h, r, t) in &relation_assertions {
            out_index.entry((h, r)).or_default().push(t);
            in_index.entry(t).or_default().push((h, r));
        }
        let mut types_index: BTreeMap<EntityId, Vec<TypeId>> = BTreeMap::new();
        for &(e, c) in &type_assertions {
            types_index.entry(e).or_default().push(c);
        }
        KnowledgeGraph {
            entities,
            relations,
            types,
            relation_assertions,
            type_assertions,
            out_index,
            in_index,
            types_index,
        }
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn types(&self) -> &Vocab {
        &self.types
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn type_count(&self) -> usize {
        self.types.len()
    }

    pub fn relation_assertions(&self) -> &BTreeSet<Triple> {
        &self.relation_assertions
    }

    pub fn type_assertions(&self) -> &BTreeSet<(EntityId, TypeId)> {
        &self.type_assertions
    }

    pub fn contains_entity(&self, e: EntityId) -> bool {
        e.0 < self.entities.len()
    }

    pub fn contains_relation(&self, r: RelationId) -> bool {
        r.0 < self.relations.len()
    }

    pub fn entity_id(&self, name: &str) -> KgResult<EntityId> {
        self.entities
            .id(name)
            .map(EntityId)
            .ok_or_else(|| KgError::UnknownEntity(name.to_string()))
    }

    pub fn relation_id(&self, name: &str) -> KgResult<RelationId> {
        self.relations
            .id(name)
            .map(RelationId)
            .ok_or_else(|| KgError::UnknownRelation(name.to_string()))
    }

    /// Tails reachable from `head` over `relation`.
    pub fn tails(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.out_index
            .get(&(head, relation))
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// `(head, relation)` pairs of assertions ending at `tail`.
    pub fn in_edges(&self, tail: EntityId) -> &[(EntityId, RelationId)] {
        self.in_index
            .get(&tail)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    /// Entities with at least one incoming assertion, ascending by id.
    pub fn entities_with_in_edges(&self) -> Vec<EntityId> {
        self.in_index.keys().copied().collect()
    }

    /// Types asserted for an entity, sorted ascending by id. Empty if none.
    pub fn entity_types(&self, e: EntityId) -> KgResult<&[TypeId]> {
        if !self.contains_entity(e) {
            return Err(KgError::EntityIdRange(e.0));
        }
        Ok(self
            .types_index
            .get(&e)
            .map(|v| v.as_slice())
            .unwrap_or(&[]))
    }

    /// Entities incident to at least one relation assertion.
    pub fn edge_entities(&self) -> BTreeSet<EntityId> {
        let mut set = BTreeSet::new();
        for &(h, _, t) in &self.relation_assertions {
            set.insert(h);
            set.insert(t);
        }
        set
    }

    /// Write the graph as `triples.tsv` + `types.tsv` + `vocab.json` in `dir`.
    pub fn save(&self, dir: &Path) -> KgResult<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut triples = String::new();
        for &(h, r, t) in &self.relation_assertions {
            triples.push_str(&format!(
                "{}\t{}\t{}\n",
                self.entities.name(h.0).unwrap(),
                self.relations.name(r.0).unwrap(),
                self.entities.name(t.0).unwrap(),
            ));
        }
        let triples_path = dir.join("triples.tsv");
        fs::write(&triples_path, triples).map_err(|e| io_err(&triples_path, e))?;

        let mut types = String::new();
        for &(e, c) in &self.type_assertions {
            types.push_str(&format!(
                "{}\t{}\n",
                self.entities.name(e.0).unwrap(),
                self.types.name(c.0).unwrap(),
            ));
        }
        let types_path = dir.join("types.tsv");
        fs::write(&types_path, types).map_err(|e| io_err(&types_path, e))?;

        let manifest = VocabManifest {
            entities: self.entities.names().to_vec(),
            relations: self.relations.names().to_vec(),
            types: self.types.names().to_vec(),
        };
        let vocab_path = dir.join("vocab.json");
        let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&vocab_path, json).map_err(|e| io_err(&vocab_path, e))?;
        Ok(())
    }

    /// Load a graph saved by [`KnowledgeGraph::save`]; ids are restored from
    /// the vocabulary manifest, so the round trip is exact.
    pub fn load_dir(dir: &Path) -> KgResult<Self> {
        let vocab_path = dir.join("vocab.json");
        let json = fs::read_to_string(&vocab_path).map_err(|e| io_err(&vocab_path, e))?;
        let manifest: VocabManifest =
            serde_json::from_str(&json).map_err(|e| KgError::Manifest {
                path: vocab_path.clone(),
                reason: e.to_string(),
            })?;
        let mut builder = KgBuilder::new();
        for name in &manifest.entities {
            builder.entities.intern(name);
        }
        for name in &manifest.relations {
            builder.relations.intern(name);
        }
        for name in &manifest.types {
            builder.types.intern(name);
        }
        if builder.types.name(0) != Some(UNKNOWN_TYPE_NAME) {
            return Err(KgError::Manifest {
                path: vocab_path,
                reason: format!("type id 0 must be `{UNKNOWN_TYPE_NAME}`"),
            });
        }
        builder.read_triples(&dir.join("triples.tsv"))?;
        builder.read_types(&dir.join("types.tsv"))?;
        Ok(builder.build())
    }
}

#[derive(Serialize, Deserialize)]
struct VocabManifest {
    entities: Vec<String>,
    relations: Vec<String>,
    types: Vec<String>,
}

fn io_err(path: &Path, source: std::io::Error) -> KgError {
    KgError::Io {
        path: path.to_path_buf(),
        source,
    }
}

struct KgBuilder {
    entities: Vocab,
    relations: Vocab,
    types: Vocab,
    relation_assertions: BTreeSet<Triple>,
    type_assertions: BTreeSet<(EntityId, TypeId)>,
}

impl KgBuilder {
    fn new() -> Self {
        let mut types = Vocab::new();
        types.intern(UNKNOWN_TYPE_NAME);
        KgBuilder {
            entities: Vocab::new(),
            relations: Vocab::new(),
            types,
            relation_assertions: BTreeSet::new(),
            type_assertions: BTreeSet::new(),
        }
    }

    fn read_triples(&mut self, path: &Path) -> KgResult<()> {
        for (lineno, line) in read_lines(path)? {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(KgError::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    expected: 3,
                    found: fields.len(),
                });
            }
            let h = EntityId(self.entities.intern(fields[0]));
            let r = RelationId(self.relations.intern(fields[1]));
            let t = EntityId(self.entities.intern(fields[2]));
            self.relation_assertions.insert((h, r, t));
        }
        Ok(())
    }

    fn read_types(&mut self, path: &Path) -> KgResult<()> {
        for (lineno, line) in read_lines(path)? {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(KgError::Parse {
                    path: path.to_path_buf(),
                    line: lineno,
                    expected: 2,
                    found: fields.len(),
                });
            }
            // Entities seen only here are still admitted to the vocabulary.
            let e = EntityId(self.entities.intern(fields[0]));
            let c = TypeId(self.types.intern(fields[1]));
            self.type_assertions.insert((e, c));
        }
        Ok(())
    }

    fn build(self) -> KnowledgeGraph {
        KnowledgeGraph::from_parts(
            self.entities,
            self.relations,
            self.types,
            self.relation_assertions,
            self.type_assertions,
        )
    }
}

/// Non-comment, non-blank lines of a TSV file with 1-based line numbers.
fn read_lines(path: &Path) -> KgResult<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

/// Load one knowledge graph from a triples file and a types file.
pub fn load_kg(triples_path: &Path, types_path: &Path) -> KgResult<KnowledgeGraph> {
    let mut builder = KgBuilder::new();
    builder.read_triples(triples_path)?;
    builder.read_types(types_path)?;
    Ok(builder.build())
}

/// Train/valid/test graphs sharing one vocabulary. `valid` contains the
/// training edges plus validation edges; `test` additionally contains the
/// test edges.
#[derive(Debug, Clone)]
pub struct SplitGraphs {
    pub train: KnowledgeGraph,
    pub valid: KnowledgeGraph,
    pub test: KnowledgeGraph,
    /// True when the entities incident to test-only edges are disjoint from
    /// the entities incident to training edges.
    pub inductive: bool,
}

impl SplitGraphs {
    /// The evaluation graph of a regime's answers: always the full test graph.
    pub fn full(&self) -> &KnowledgeGraph {
        &self.test
    }
}

/// Load `train.tsv`, `valid.tsv`, `test.tsv`, and `types.tsv` from a
/// directory; the valid/test graphs are cumulative unions.
pub fn load_splits(dir: &Path) -> KgResult<SplitGraphs> {
    let paths: Vec<PathBuf> = ["train.tsv", "valid.tsv", "test.tsv", "types.tsv"]
        .iter()
        .map(|f| dir.join(f))
        .collect();
    for p in &paths {
        if !p.exists() {
            return Err(KgError::MissingFile(p.clone()));
        }
    }

    // One shared vocabulary over the union, interned in split order.
    let mut builder = KgBuilder::new();
    builder.read_triples(&paths[0])?;
    let train_edges = builder.relation_assertions.clone();
    builder.read_triples(&paths[1])?;
    let valid_edges = builder.relation_assertions.clone();
    builder.read_triples(&paths[2])?;
    let test_edges = builder.relation_assertions.clone();
    builder.read_types(&paths[3])?;

    let entities = builder.entities;
    let relations = builder.relations;
    let types = builder.types;
    let type_assertions = builder.type_assertions;

    let train = KnowledgeGraph::from_parts(
        entities.clone(),
        relations.clone(),
        types.clone(),
        train_edges.clone(),
        type_assertions.clone(),
    );
    let valid = KnowledgeGraph::from_parts(
        entities.clone(),
        relations.clone(),
        types.clone(),
        valid_edges,
        type_assertions.clone(),
    );
    let test = KnowledgeGraph::from_parts(
        entities,
        relations,
        types,
        test_edges.clone(),
        type_assertions,
    );

    let test_only: BTreeSet<Triple> = test_edges.difference(&train_edges).copied().collect();
    let mut test_only_entities = BTreeSet::new();
    for &(h, _, t) in &test_only {
        test_only_entities.insert(h);
        test_only_entities.insert(t);
    }
    let train_entities = train.edge_entities();
    let inductive = !test_only.is_empty() && test_only_entities.is_disjoint(&train_entities);

    Ok(SplitGraphs {
        train,
        valid,
        test,
        inductive,
    })
}
