//! Keyed access to ingested records and the P279 class graph.
//!
//! The on-disk store is a directory of flat files:
//!
//! * `records.jsonl`: canonical record lines, in first-seen order;
//! * `index.tsv`: `qid<TAB>byte offset` into `records.jsonl`, sorted by qid;
//! * `classgraph.tsv`: `child<TAB>parent` subclass edges, sorted.
//!
//! It is written once and then only read. [`MemoryStore`] offers the same
//! interface without touching disk.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::io::AtomicFile;
use crate::record::{EntityRecord, Qid};

pub const RECORDS_FILE: &str = "records.jsonl";
pub const INDEX_FILE: &str = "index.tsv";
pub const CLASS_GRAPH_FILE: &str = "classgraph.tsv";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store I/O error at {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("conflicting records for {0}: same identifier, different content")]
    Integrity(Qid),
    #[error("corrupt store file {path} line {line}: {message}")]
    Corrupt {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl StoreError {
    fn io(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
        move |source| StoreError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Direct P279 edges, child → parents, with the reverse view kept alongside.
/// May contain cycles.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClassGraph {
    parents: BTreeMap<Qid, BTreeSet<Qid>>,
    children: BTreeMap<Qid, BTreeSet<Qid>>,
}

impl ClassGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_edge(&mut self, child: Qid, parent: Qid) {
        self.parents.entry(child).or_default().insert(parent);
        self.children.entry(parent).or_default().insert(child);
    }

    pub fn add_record(&mut self, record: &EntityRecord) {
        for &parent in &record.subclass_of {
            self.add_edge(record.qid, parent);
        }
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a EntityRecord>) -> Self {
        let mut graph = Self::new();
        for r in records {
            graph.add_record(r);
        }
        graph
    }

    pub fn parents(&self, child: Qid) -> impl Iterator<Item = Qid> + '_ {
        self.parents.get(&child).into_iter().flatten().copied()
    }

    pub fn children(&self, parent: Qid) -> impl Iterator<Item = Qid> + '_ {
        self.children.get(&parent).into_iter().flatten().copied()
    }

    /// All `(child, parent)` edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (Qid, Qid)> + '_ {
        self.parents
            .iter()
            .flat_map(|(&c, ps)| ps.iter().map(move |&p| (c, p)))
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(BTreeSet::len).sum()
    }

    /// `root` plus every class from which `root` is reachable via P279.
    pub fn descendants(&self, root: Qid) -> BTreeSet<Qid> {
        descendants(self, root)
    }
}

/// `{root}` ∪ every qid that reaches `root` by following subclass edges.
/// Terminates on cyclic graphs; all members of a cycle through the root count.
pub fn descendants(graph: &ClassGraph, root: Qid) -> BTreeSet<Qid> {
    let mut seen = BTreeSet::from([root]);
    let mut queue = VecDeque::from([root]);
    while let Some(class) = queue.pop_front() {
        for child in graph.children(class) {
            if seen.insert(child) {
                queue.push_back(child);
            }
        }
    }
    seen
}

/// Read access shared by both backends.
pub trait EntityStore {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, qid: Qid) -> Result<Option<EntityRecord>, StoreError>;

    fn class_graph(&self) -> &ClassGraph;

    /// Every record in ascending qid order.
    fn records(&self) -> Box<dyn Iterator<Item = Result<EntityRecord, StoreError>> + '_>;
}

/// Insert with the store's dedup rule: identical duplicates are dropped,
/// conflicting ones are an integrity error. Returns whether it was new.
fn dedup_insert(
    map: &mut BTreeMap<Qid, EntityRecord>,
    record: EntityRecord,
) -> Result<bool, StoreError> {
    match map.get(&record.qid) {
        Some(existing) if *existing == record => Ok(false),
        Some(_) => Err(StoreError::Integrity(record.qid)),
        None => {
            map.insert(record.qid, record);
            Ok(true)
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    records: BTreeMap<Qid, EntityRecord>,
    graph: ClassGraph,
}

impl MemoryStore {
    pub fn build(records: impl IntoIterator<Item = EntityRecord>) -> Result<Self, StoreError> {
        let mut store = MemoryStore::default();
        for record in records {
            let graph_record = record.clone();
            if dedup_insert(&mut store.records, record)? {
                store.graph.add_record(&graph_record);
            }
        }
        Ok(store)
    }
}

impl EntityStore for MemoryStore {
    fn len(&self) -> usize {
        self.records.len()
    }

    fn get(&self, qid: Qid) -> Result<Option<EntityRecord>, StoreError> {
        Ok(self.records.get(&qid).cloned())
    }

    fn class_graph(&self) -> &ClassGraph {
        &self.graph
    }

    fn records(&self) -> Box<dyn Iterator<Item = Result<EntityRecord, StoreError>> + '_> {
        Box::new(self.records.values().cloned().map(Ok))
    }
}

/// Counters from a store build.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct BuildStats {
    pub records: u64,
    pub duplicates: u64,
    pub class_edges: u64,
}

/// The directory-backed store.
#[derive(Debug)]
pub struct DirStore {
    dir: PathBuf,
    index: Vec<(Qid, u64)>,
    graph: ClassGraph,
}

fn read_line_at(path: &Path, offset: u64) -> Result<String, StoreError> {
    let mut file = File::open(path).map_err(StoreError::io(path))?;
    file.seek(SeekFrom::Start(offset)).map_err(StoreError::io(path))?;
    let mut line = String::new();
    BufReader::new(file)
        .read_line(&mut line)
        .map_err(StoreError::io(path))?;
    Ok(line.trim_end_matches('\n').to_string())
}

/// Write a store directory from a record stream.
///
/// Identical duplicate records are dropped; a duplicate qid with different
/// content aborts the build with [`StoreError::Integrity`] and leaves no
/// partial files behind.
pub fn build_store<I, E>(records: I, dir: &Path) -> Result<(DirStore, BuildStats), StoreError>
where
    I: IntoIterator<Item = Result<EntityRecord, E>>,
    E: Into<StoreError>,
{
    std::fs::create_dir_all(dir).map_err(StoreError::io(dir))?;
    let records_path = dir.join(RECORDS_FILE);
    let mut out = AtomicFile::create(&records_path).map_err(StoreError::io(&records_path))?;
    let mut offsets: HashMap<Qid, u64> = HashMap::new();
    let mut graph = ClassGraph::new();
    let mut stats = BuildStats::default();
    let mut offset = 0u64;

    for record in records {
        let record = record.map_err(Into::into)?;
        let line = record.to_canonical_json();
        if let Some(&existing) = offsets.get(&record.qid) {
            out.flush().map_err(StoreError::io(&records_path))?;
            if read_line_at(out.temp_path(), existing)? != line {
                return Err(StoreError::Integrity(record.qid));
            }
            stats.duplicates += 1;
            continue;
        }
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(StoreError::io(&records_path))?;
        offsets.insert(record.qid, offset);
        offset += line.len() as u64 + 1;
        graph.add_record(&record);
        stats.records += 1;
    }

    let mut index: Vec<(Qid, u64)> = offsets.into_iter().collect();
    index.sort_unstable();

    let index_path = dir.join(INDEX_FILE);
    let mut idx = AtomicFile::create(&index_path).map_err(StoreError::io(&index_path))?;
    for (qid, off) in &index {
        writeln!(idx, "{qid}\t{off}").map_err(StoreError::io(&index_path))?;
    }

    let graph_path = dir.join(CLASS_GRAPH_FILE);
    let mut cg = AtomicFile::create(&graph_path).map_err(StoreError::io(&graph_path))?;
    for (child, parent) in graph.edges() {
        writeln!(cg, "{child}\t{parent}").map_err(StoreError::io(&graph_path))?;
        stats.class_edges += 1;
    }

    out.commit().map_err(StoreError::io(&records_path))?;
    idx.commit().map_err(StoreError::io(&index_path))?;
    cg.commit().map_err(StoreError::io(&graph_path))?;

    Ok((
        DirStore {
            dir: dir.to_path_buf(),
            index,
            graph,
        },
        stats,
    ))
}

fn read_tsv_pairs(path: &Path) -> Result<Vec<(String, String)>, StoreError> {
    let file = File::open(path).map_err(StoreError::io(path))?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(StoreError::io(path))?;
        let Some((a, b)) = line.split_once('\t') else {
            return Err(StoreError::Corrupt {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected two tab-separated fields".into(),
            });
        };
        pairs.push((a.to_string(), b.to_string()));
    }
    Ok(pairs)
}

impl DirStore {
    /// Open an existing store directory.
    pub fn open(dir: &Path) -> Result<Self, StoreError> {
        let corrupt = |path: &Path, line: usize, message: String| StoreError::Corrupt {
            path: path.to_path_buf(),
            line,
            message,
        };

        let index_path = dir.join(INDEX_FILE);
        let mut index = Vec::new();
        for (i, (qid, off)) in read_tsv_pairs(&index_path)?.into_iter().enumerate() {
            let qid: Qid = qid.parse().map_err(|e| corrupt(&index_path, i + 1, format!("{e}")))?;
            let off: u64 = off.parse().map_err(|e| corrupt(&index_path, i + 1, format!("{e}")))?;
            index.push((qid, off));
        }
        if !index.windows(2).all(|w| w[0].0 < w[1].0) {
            return Err(corrupt(&index_path, 0, "index is not strictly sorted".into()));
        }

        let graph_path = dir.join(CLASS_GRAPH_FILE);
        let mut graph = ClassGraph::new();
        for (i, (child, parent)) in read_tsv_pairs(&graph_path)?.into_iter().enumerate() {
            let child: Qid = child.parse().map_err(|e| corrupt(&graph_path, i + 1, format!("{e}")))?;
            let parent: Qid = parent.parse().map_err(|e| corrupt(&graph_path, i + 1, format!("{e}")))?;
            graph.add_edge(child, parent);
        }

        let records_path = dir.join(RECORDS_FILE);
        if !records_path.is_file() {
            return Err(StoreError::Io {
                path: records_path,
                source: io::Error::new(io::ErrorKind::NotFound, "records file missing"),
            });
        }

        Ok(DirStore {
            dir: dir.to_path_buf(),
            index,
            graph,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn records_path(&self) -> PathBuf {
        self.dir.join(RECORDS_FILE)
    }

    fn decode(&self, line: &str, qid: Qid) -> Result<EntityRecord, StoreError> {
        EntityRecord::from_canonical_json(line).map_err(|e| StoreError::Corrupt {
            path: self.records_path(),
            line: 0,
            message: format!("record {qid}: {e}"),
        })
    }
}

impl EntityStore for DirStore {
    fn len(&self) -> usize {
        self.index.len()
    }

    fn get(&self, qid: Qid) -> Result<Option<EntityRecord>, StoreError> {
        let Ok(pos) = self.index.binary_search_by_key(&qid, |&(q, _)| q) else {
            return Ok(None);
        };
        let line = read_line_at(&self.records_path(), self.index[pos].1)?;
        self.decode(&line, qid).map(Some)
    }

    fn class_graph(&self) -> &ClassGraph {
        &self.graph
    }

    fn records(&self) -> Box<dyn Iterator<Item = Result<EntityRecord, StoreError>> + '_> {
        let path = self.records_path();
        let mut reader = match File::open(&path) {
            Ok(f) => BufReader::new(f),
            Err(source) => return Box::new(std::iter::once(Err(StoreError::Io { path, source }))),
        };
        let mut line = String::new();
        Box::new(self.index.iter().map(move |&(qid, offset)| {
            reader
                .seek(SeekFrom::Start(offset))
                .map_err(StoreError::io(&path))?;
            line.clear();
            reader.read_line(&mut line).map_err(StoreError::io(&path))?;
            self.decode(line.trim_end_matches('\n'), qid)
        }))
    }
}

impl From<std::convert::Infallible> for StoreError {
    fn from(e: std::convert::Infallible) -> Self {
        match e {}
    }
}
