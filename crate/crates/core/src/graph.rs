//! Directed-graph data model, edge-list CSV ingestion and egocentric
//! (snowball) network delineation.
//!
//! A [`BlogNetwork`] is immutable after construction. Node order is the
//! insertion order of the ingest file, which makes every downstream vector
//! and matrix deterministic.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Expected header of an edge-list CSV.
pub const EDGE_LIST_HEADER: &str = "source_id,target_id";

/// Opaque blog identifier. Comparison is exact byte equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BlogId(String);

impl BlogId {
    /// Builds an id, rejecting empty tokens and embedded delimiter
    /// characters (comma, CR, LF).
    pub fn new(raw: impl Into<String>) -> Result<Self, GraphError> {
        let raw = raw.into();
        if raw.is_empty() || raw.contains(',') || raw.contains('\n') || raw.contains('\r') {
            return Err(GraphError::InvalidBlogId(raw));
        }
        Ok(BlogId(raw))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for BlogId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid blog id {0:?}: must be non-empty and free of delimiters")]
    InvalidBlogId(String),
    #[error("malformed row at line {0}")]
    MalformedRow(u64),
    #[error("edge-list file contains no edge rows")]
    EmptyFile,
    #[error("unknown seed blog {0:?}")]
    UnknownSeed(String),
    #[error("i/o failure: {0}")]
    IoFailure(#[from] std::io::Error),
}

/// Non-fatal events observed while ingesting an edge list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    /// The row repeats an edge already present; it was collapsed.
    DuplicateEdge { line: u64, source: BlogId, target: BlogId },
    /// The row links a blog to itself; it was dropped.
    SelfLoop { line: u64, id: BlogId },
}

impl fmt::Display for LoadWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadWarning::DuplicateEdge { line, source, target } => {
                write!(f, "line {line}: duplicate edge {source} -> {target} collapsed")
            }
            LoadWarning::SelfLoop { line, id } => {
                write!(f, "line {line}: self-loop on {id} dropped")
            }
        }
    }
}

/// Result of [`load_edge_list`]: the network plus any collapse/drop warnings.
#[derive(Debug)]
pub struct EdgeListLoad {
    pub network: BlogNetwork,
    pub warnings: Vec<LoadWarning>,
}

/// In/out degree of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreePair {
    pub in_degree: usize,
    pub out_degree: usize,
}

/// Directed graph of blog nodes and recommendation edges.
///
/// Invariants: no self-loops, no duplicate edges, every edge endpoint is a
/// member node. Adjacency lists are sorted by node index, so edge iteration
/// order is canonical.
#[derive(Debug, Clone)]
pub struct BlogNetwork {
    ids: Vec<BlogId>,
    index: HashMap<BlogId, usize>,
    out_adj: Vec<Vec<usize>>,
    in_adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl BlogNetwork {
    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Node ids in network (insertion) order.
    pub fn ids(&self) -> &[BlogId] {
        &self.ids
    }

    pub fn id(&self, node: usize) -> &BlogId {
        &self.ids[node]
    }

    pub fn node_index(&self, id: &BlogId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn contains(&self, id: &BlogId) -> bool {
        self.index.contains_key(id)
    }

    /// Out-neighbours of `node`, sorted by node index.
    pub fn out_neighbors(&self, node: usize) -> &[usize] {
        &self.out_adj[node]
    }

    /// In-neighbours of `node`, sorted by node index.
    pub fn in_neighbors(&self, node: usize) -> &[usize] {
        &self.in_adj[node]
    }

    /// All edges as (source, target) index pairs in canonical order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.out_adj
            .iter()
            .enumerate()
            .flat_map(|(src, targets)| targets.iter().map(move |&dst| (src, dst)))
    }

    pub fn has_edge(&self, source: usize, target: usize) -> bool {
        self.out_adj[source].binary_search(&target).is_ok()
    }

    /// In/out degree per node, aligned with [`BlogNetwork::ids`]. The counts
    /// equal the row/column sums of the adjacency matrix.
    pub fn degree_sequences(&self) -> Vec<DegreePair> {
        (0..self.node_count())
            .map(|v| DegreePair {
                in_degree: self.in_adj[v].len(),
                out_degree: self.out_adj[v].len(),
            })
            .collect()
    }

    /// Converts every edge into a mutual pair, for comparability with
    /// symmetrised analyses.
    pub fn symmetrize(&self) -> BlogNetwork {
        let mut builder = NetworkBuilder::new();
        for id in &self.ids {
            builder.add_node(id.clone());
        }
        for (src, dst) in self.edges() {
            builder.add_edge(self.ids[src].clone(), self.ids[dst].clone());
            builder.add_edge(self.ids[dst].clone(), self.ids[src].clone());
        }
        builder.build()
    }
}

/// Incremental constructor used by the loader and the synthetic generator.
#[derive(Debug, Default)]
pub struct NetworkBuilder {
    ids: Vec<BlogId>,
    index: HashMap<BlogId, usize>,
    edges: Vec<(usize, usize)>,
    seen: HashSet<(usize, usize)>,
}

/// Outcome of one [`NetworkBuilder::add_edge`] call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeInsert {
    Added,
    Duplicate,
    SelfLoop,
}

impl NetworkBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a node, returning its index. Re-adding is a no-op.
    pub fn add_node(&mut self, id: BlogId) -> usize {
        if let Some(&ix) = self.index.get(&id) {
            return ix;
        }
        let ix = self.ids.len();
        self.index.insert(id.clone(), ix);
        self.ids.push(id);
        ix
    }

    pub fn add_edge(&mut self, source: BlogId, target: BlogId) -> EdgeInsert {
        let s = self.add_node(source);
        let t = self.add_node(target);
        if s == t {
            return EdgeInsert::SelfLoop;
        }
        if !self.seen.insert((s, t)) {
            return EdgeInsert::Duplicate;
        }
        self.edges.push((s, t));
        EdgeInsert::Added
    }

    pub fn build(self) -> BlogNetwork {
        let n = self.ids.len();
        let mut out_adj = vec![Vec::new(); n];
        let mut in_adj = vec![Vec::new(); n];
        for (s, t) in &self.edges {
            out_adj[*s].push(*t);
            in_adj[*t].push(*s);
        }
        for list in out_adj.iter_mut().chain(in_adj.iter_mut()) {
            list.sort_unstable();
        }
        BlogNetwork {
            ids: self.ids,
            index: self.index,
            out_adj,
            in_adj,
            edge_count: self.edges.len(),
        }
    }
}

/// Loads an edge-list CSV (`source_id,target_id` header, UTF-8, LF or CRLF).
///
/// Duplicate edge rows collapse to one edge and self-loop rows are dropped;
/// both are logged and returned as [`LoadWarning`]s. Fields must not contain
/// commas — quoting is not supported and such rows are rejected.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<EdgeListLoad, GraphError> {
    let mut text = String::new();
    BufReader::new(File::open(path)?).read_to_string(&mut text)?;
    parse_edge_list(&text)
}

/// Parses edge-list CSV text. See [`load_edge_list`].
pub fn parse_edge_list(text: &str) -> Result<EdgeListLoad, GraphError> {
    let mut builder = NetworkBuilder::new();
    let mut warnings = Vec::new();
    let mut data_rows = 0u64;
    for (ix, raw_line) in text.lines().enumerate() {
        let line_no = ix as u64 + 1;
        let line = raw_line.trim_end_matches('\r');
        if line_no == 1 {
            if line.trim() != EDGE_LIST_HEADER {
                return Err(GraphError::MalformedRow(1));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split(',');
        let (src, dst) = match (fields.next(), fields.next(), fields.next()) {
            (Some(s), Some(t), None) => (s.trim(), t.trim()),
            _ => return Err(GraphError::MalformedRow(line_no)),
        };
        let source = BlogId::new(src).map_err(|_| GraphError::MalformedRow(line_no))?;
        let target = BlogId::new(dst).map_err(|_| GraphError::MalformedRow(line_no))?;
        data_rows += 1;
        match builder.add_edge(source.clone(), target.clone()) {
            EdgeInsert::Added => {}
            EdgeInsert::Duplicate => {
                let w = LoadWarning::DuplicateEdge { line: line_no, source, target };
                log::warn!("{w}");
                warnings.push(w);
            }
            EdgeInsert::SelfLoop => {
                let w = LoadWarning::SelfLoop { line: line_no, id: source };
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    if data_rows == 0 {
        return Err(GraphError::EmptyFile);
    }
    Ok(EdgeListLoad { network: builder.build(), warnings })
}

/// Writes `net` in the edge-list CSV format, edges in canonical order.
pub fn write_edge_list(net: &BlogNetwork, mut out: impl Write) -> Result<(), GraphError> {
    writeln!(out, "{EDGE_LIST_HEADER}")?;
    for (src, dst) in net.edges() {
        writeln!(out, "{},{}", net.id(src), net.id(dst))?;
    }
    Ok(())
}

/// Egocentric delineation at 1 degree of separation: the subgraph induced on
/// the seed plus every blog it cites, keeping all edges among them
/// (including edges back to the seed).
pub fn delineate_snowball(net: &BlogNetwork, seed: &BlogId) -> Result<BlogNetwork, GraphError> {
    delineate_snowball_depth(net, seed, 1)
}

/// Snowball delineation at `depth` degrees of separation, expanding
/// breadth-first over out-edges. `depth` 0 keeps the seed alone.
pub fn delineate_snowball_depth(
    net: &BlogNetwork,
    seed: &BlogId,
    depth: usize,
) -> Result<BlogNetwork, GraphError> {
    let seed_ix = net
        .node_index(seed)
        .ok_or_else(|| GraphError::UnknownSeed(seed.to_string()))?;

    let mut member = vec![false; net.node_count()];
    member[seed_ix] = true;
    let mut frontier = VecDeque::new();
    frontier.push_back((seed_ix, 0usize));
    while let Some((v, d)) = frontier.pop_front() {
        if d == depth {
            continue;
        }
        for &w in net.out_neighbors(v) {
            if !member[w] {
                member[w] = true;
                frontier.push_back((w, d + 1));
            }
        }
    }

    let mut builder = NetworkBuilder::new();
    for (ix, id) in net.ids().iter().enumerate() {
        if member[ix] {
            builder.add_node(id.clone());
        }
    }
    for (src, dst) in net.edges() {
        if member[src] && member[dst] {
            builder.add_edge(net.id(src).clone(), net.id(dst).clone());
        }
    }
    Ok(builder.build())
}
