//! DAG application model: task modules with CPU-cycle workloads connected by
//! data edges that carry output bits.
//!
//! Node ids are 1-based in files and reports. Inside the crate every
//! per-node vector is indexed by position in the canonical (id-sorted) module
//! list, which for a valid graph is simply `id - 1`.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskModule {
    pub id: usize,
    #[serde(rename = "workload_cycles")]
    pub workload: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
}

impl TaskModule {
    pub fn new(id: usize, workload: u64) -> Self {
        TaskModule {
            id,
            workload,
            name: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataEdge {
    pub from: usize,
    pub to: usize,
    pub bits: u64,
}

impl DataEdge {
    pub fn new(from: usize, to: usize, bits: u64) -> Self {
        DataEdge { from, to, bits }
    }
}

/// One adjacency entry. `node` is a node index, `edge` an index into
/// [`TaskGraph::edges`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Adj {
    pub node: usize,
    pub bits: u64,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskGraph {
    modules: Vec<TaskModule>,
    edges: Vec<DataEdge>,
    parents: Vec<Vec<Adj>>,
    children: Vec<Vec<Adj>>,
    note: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    nodes: Vec<TaskModule>,
    edges: Vec<DataEdge>,
}

impl TaskGraph {
    /// Builds a graph in canonical order without checking invariants; run
    /// [`validate_graph`] (or use [`TaskGraph::new`]) before solving.
    pub fn from_parts(mut modules: Vec<TaskModule>, mut edges: Vec<DataEdge>) -> Self {
        modules.sort_by_key(|m| m.id);
        edges.sort();
        let pos: HashMap<usize, usize> = modules
            .iter()
            .enumerate()
            .map(|(i, m)| (m.id, i))
            .collect();
        let mut parents = vec![Vec::new(); modules.len()];
        let mut children = vec![Vec::new(); modules.len()];
        for (k, e) in edges.iter().enumerate() {
            if let (Some(&a), Some(&b)) = (pos.get(&e.from), pos.get(&e.to)) {
                children[a].push(Adj {
                    node: b,
                    bits: e.bits,
                    edge: k,
                });
                parents[b].push(Adj {
                    node: a,
                    bits: e.bits,
                    edge: k,
                });
            }
        }
        TaskGraph {
            modules,
            edges,
            parents,
            children,
            note: None,
        }
    }

    /// Builds and validates.
    pub fn new(modules: Vec<TaskModule>, edges: Vec<DataEdge>) -> Result<Self> {
        let g = Self::from_parts(modules, edges);
        let report = validate_graph(&g);
        if report.is_valid() {
            Ok(g)
        } else {
            Err(Error::InvalidGraph(report.violations))
        }
    }

    /// Convenience constructor from `(workload)` per node and `(from, to, bits)` triples.
    pub fn from_weights(workloads: &[u64], edges: &[(usize, usize, u64)]) -> Result<Self> {
        let modules = workloads
            .iter()
            .enumerate()
            .map(|(i, &w)| TaskModule::new(i + 1, w))
            .collect();
        let edges = edges
            .iter()
            .map(|&(f, t, b)| DataEdge::new(f, t, b))
            .collect();
        Self::new(modules, edges)
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn note(&self) -> Option<&str> {
        self.note.as_deref()
    }

    pub fn len(&self) -> usize {
        self.modules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modules.is_empty()
    }

    pub fn modules(&self) -> &[TaskModule] {
        &self.modules
    }

    pub fn edges(&self) -> &[DataEdge] {
        &self.edges
    }

    pub fn workload(&self, idx: usize) -> u64 {
        self.modules[idx].workload
    }

    pub fn id(&self, idx: usize) -> usize {
        self.modules[idx].id
    }

    pub fn parents(&self, idx: usize) -> &[Adj] {
        &self.parents[idx]
    }

    pub fn children(&self, idx: usize) -> &[Adj] {
        &self.children[idx]
    }

    /// Index of the sink (node N).
    pub fn sink(&self) -> usize {
        self.modules.len() - 1
    }

    /// Node 1 and node N must run on the client.
    pub fn is_pinned(&self, idx: usize) -> bool {
        idx == 0 || idx + 1 == self.modules.len()
    }

    /// Indices of every node that `idx` reaches (itself excluded).
    pub fn descendants(&self, idx: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack: Vec<usize> = self.children[idx].iter().map(|a| a.node).collect();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend(self.children[v].iter().map(|a| a.node));
            }
        }
        seen
    }

    /// Topological order of node indices, ties broken by smallest index.
    /// Panics on a cyclic graph; use [`topological_order`] for a checked version.
    pub fn topo_indices(&self) -> Vec<usize> {
        kahn(self).expect("graph must be acyclic")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        load_graph(path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        save_graph(self, path)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            note: self.note.clone(),
            nodes: self.modules.clone(),
            edges: self.edges.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("graph serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Schema(e.to_string()),
            _ => Error::Json(e),
        })?;
        if file.nodes.is_empty() {
            return Err(Error::Schema("empty node list".into()));
        }
        let mut g = TaskGraph::new(file.nodes, file.edges)?;
        g.note = file.note;
        Ok(g)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphViolation {
    TooFewNodes(usize),
    DuplicateId(usize),
    NonContiguousIds,
    UnknownEndpoint { from: usize, to: usize },
    SelfLoop(usize),
    DuplicateEdge { from: usize, to: usize },
    Cycle { from: usize, to: usize },
    SourceHasParents,
    SinkHasChildren,
    ZeroInteriorWorkload(usize),
}

impl fmt::Display for GraphViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphViolation::TooFewNodes(n) => write!(f, "need at least 2 nodes, found {n}"),
            GraphViolation::DuplicateId(id) => write!(f, "duplicate id {id}"),
            GraphViolation::NonContiguousIds => write!(f, "non-contiguous ids"),
            GraphViolation::UnknownEndpoint { from, to } => {
                write!(f, "edge {from} -> {to} references an unknown node")
            }
            GraphViolation::SelfLoop(id) => write!(f, "self loop on {id}"),
            GraphViolation::DuplicateEdge { from, to } => {
                write!(f, "duplicate edge {from} -> {to}")
            }
            GraphViolation::Cycle { from, to } => {
                write!(f, "cycle detected (edge {from} -> {to})")
            }
            GraphViolation::SourceHasParents => write!(f, "node 1 has parents"),
            GraphViolation::SinkHasChildren => write!(f, "node N has children"),
            GraphViolation::ZeroInteriorWorkload(id) => {
                write!(f, "interior node {id} has zero workload")
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<GraphViolation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_graph(graph: &TaskGraph) -> ValidationReport {
    let mut v = Vec::new();
    let n = graph.len();
    if n < 2 {
        v.push(GraphViolation::TooFewNodes(n));
    }

    let ids: Vec<usize> = graph.modules.iter().map(|m| m.id).collect();
    let mut seen = BTreeSet::new();
    for &id in &ids {
        if !seen.insert(id) {
            v.push(GraphViolation::DuplicateId(id));
        }
    }
    if !ids.iter().enumerate().all(|(i, &id)| id == i + 1) && seen.len() == n {
        v.push(GraphViolation::NonContiguousIds);
    }

    let mut pairs = BTreeSet::new();
    for e in &graph.edges {
        if !seen.contains(&e.from) || !seen.contains(&e.to) {
            v.push(GraphViolation::UnknownEndpoint {
                from: e.from,
                to: e.to,
            });
        }
        if e.from == e.to {
            v.push(GraphViolation::SelfLoop(e.from));
        }
        if !pairs.insert((e.from, e.to)) {
            v.push(GraphViolation::DuplicateEdge {
                from: e.from,
                to: e.to,
            });
        }
    }

    if let Err(Error::Cycle { from, to }) = kahn(graph) {
        v.push(GraphViolation::Cycle { from, to });
    }

    if n >= 2 {
        if !graph.parents[0].is_empty() {
            v.push(GraphViolation::SourceHasParents);
        }
        if !graph.children[n - 1].is_empty() {
            v.push(GraphViolation::SinkHasChildren);
        }
        for m in &graph.modules[1..n - 1] {
            if m.workload == 0 {
                v.push(GraphViolation::ZeroInteriorWorkload(m.id));
            }
        }
    }
    ValidationReport { violations: v }
}

/// Node ids in topological order, ties broken by ascending id.
pub fn topological_order(graph: &TaskGraph) -> Result<Vec<usize>> {
    Ok(kahn(graph)?.into_iter().map(|i| graph.id(i)).collect())
}

fn kahn(graph: &TaskGraph) -> Result<Vec<usize>> {
    let n = graph.len();
    let mut indeg: Vec<usize> = graph.parents.iter().map(|p| p.len()).collect();
    let mut heap: BinaryHeap<Reverse<usize>> = (0..n)
        .filter(|&i| indeg[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = heap.pop() {
        order.push(i);
        for a in &graph.children[i] {
            indeg[a.node] -= 1;
            if indeg[a.node] == 0 {
                heap.push(Reverse(a.node));
            }
        }
    }
    if order.len() == n {
        return Ok(order);
    }
    // Every leftover node still has a leftover parent, so walking parents
    // from any of them must revisit a node.
    let start = (0..n).find(|&i| indeg[i] > 0).expect("leftover node");
    let mut on_path = vec![usize::MAX; n];
    let mut cur = start;
    let mut step = 0;
    loop {
        if on_path[cur] != usize::MAX {
            break;
        }
        on_path[cur] = step;
        step += 1;
        let p = graph.parents[cur]
            .iter()
            .find(|a| indeg[a.node] > 0)
            .expect("leftover parent")
            .node;
        if on_path[p] != usize::MAX {
            return Err(Error::Cycle {
                from: graph.id(p),
                to: graph.id(cur),
            });
        }
        cur = p;
    }
    unreachable!("cycle walk terminates by revisiting a node")
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<TaskGraph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    TaskGraph::from_json(&text)
}

pub fn save_graph(graph: &TaskGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, graph.to_json()).map_err(|e| Error::io(path, e))
}
