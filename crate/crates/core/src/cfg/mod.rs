//! Control-flow graph model: basic-block ids, the graph value itself, and
//! the readers, validators, generators and tamper mutations built on it.

mod dot;
mod graphml;
mod mutate;
mod synth;
mod validate;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::path::Path;

use thiserror::Error;

pub use dot::{parse_dot, to_dot};
pub use graphml::{parse_graphml, to_graphml};
pub use mutate::{mutate, mutate_pruned, MutateError, Mutation, MutationParseError};
pub use synth::{generate_synthetic, SyntheticSpec};
pub use validate::{validate_cfg, ValidationReport, Violation};

/// Characters that may never appear in a block id. Besides the DOT
/// delimiters this covers every separator used by the canonical string
/// (`,` `>` `:` `;`), which keeps canonicalization injective.
const FORBIDDEN_ID_CHARS: &[char] = &['"', '[', ']', ';', ',', '>', ':', '{', '}', '=', '/'];

/// Textual id of one basic block. Ordered byte-wise.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockId(String);

impl BlockId {
    pub fn new(id: impl Into<String>) -> Result<Self, CfgError> {
        let id = id.into();
        if id.is_empty() {
            return Err(CfgError::InvalidBlockId {
                id,
                reason: "empty",
            });
        }
        if let Some(c) = id
            .chars()
            .find(|c| !c.is_ascii_graphic() || FORBIDDEN_ID_CHARS.contains(c))
        {
            let reason = if c.is_ascii_whitespace() {
                "contains whitespace"
            } else if !c.is_ascii() {
                "contains non-ASCII character"
            } else {
                "contains reserved character"
            };
            return Err(CfgError::InvalidBlockId { id, reason });
        }
        Ok(BlockId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Sorts below every valid id; only used as a range bound.
    fn min_bound() -> Self {
        BlockId(String::new())
    }
}

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::str::FromStr for BlockId {
    type Err = CfgError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BlockId::new(s)
    }
}

/// A directed control transfer. Ordered lexicographically by `(src, dst)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub src: BlockId,
    pub dst: BlockId,
}

impl Edge {
    pub fn new(src: BlockId, dst: BlockId) -> Self {
        Edge { src, dst }
    }

    pub fn is_self_loop(&self) -> bool {
        self.src == self.dst
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}>{}", self.src, self.dst)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CfgError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("cannot determine entry node: {0}")]
    UnknownEntry(String),
    #[error("invalid block id {id:?}: {reason}")]
    InvalidBlockId { id: String, reason: &'static str },
    #[error("entry node {0} is not a node of the graph")]
    EntryNotInGraph(BlockId),
    #[error("edge {0} references an unknown node")]
    DanglingEdge(Edge),
    #[error("invalid synthetic graph spec: {0}")]
    InvalidSpec(String),
    #[error("unsupported input format for {0}")]
    UnsupportedFormat(String),
}

impl CfgError {
    pub(crate) fn syntax(line: usize, column: usize, message: impl Into<String>) -> Self {
        CfgError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }
}

/// Directed graph of basic blocks with a designated entry block.
///
/// Every edge has unit weight. Self-loops are representable (the DOT reader
/// accepts them) but [`validate_cfg`] reports them.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ControlFlowGraph {
    nodes: BTreeSet<BlockId>,
    edges: BTreeSet<Edge>,
    entry: BlockId,
}

impl ControlFlowGraph {
    pub fn new(
        nodes: BTreeSet<BlockId>,
        edges: BTreeSet<Edge>,
        entry: BlockId,
    ) -> Result<Self, CfgError> {
        if !nodes.contains(&entry) {
            return Err(CfgError::EntryNotInGraph(entry));
        }
        if let Some(e) = edges
            .iter()
            .find(|e| !nodes.contains(&e.src) || !nodes.contains(&e.dst))
        {
            return Err(CfgError::DanglingEdge(e.clone()));
        }
        Ok(ControlFlowGraph {
            nodes,
            edges,
            entry,
        })
    }

    /// Builds a graph from string ids; handy for tests and fixtures.
    pub fn from_edges<'a>(
        entry: &str,
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self, CfgError> {
        let mut node_set = BTreeSet::new();
        node_set.insert(BlockId::new(entry)?);
        for n in nodes {
            node_set.insert(BlockId::new(n)?);
        }
        let mut edge_set = BTreeSet::new();
        for (s, d) in edges {
            let e = Edge::new(BlockId::new(s)?, BlockId::new(d)?);
            node_set.insert(e.src.clone());
            node_set.insert(e.dst.clone());
            if !edge_set.insert(e.clone()) {
                return Err(CfgError::DuplicateEdge(e));
            }
        }
        ControlFlowGraph::new(node_set, edge_set, BlockId::new(entry)?)
    }

    pub fn nodes(&self) -> &BTreeSet<BlockId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    pub fn entry(&self) -> &BlockId {
        &self.entry
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn contains_node(&self, id: &BlockId) -> bool {
        self.nodes.contains(id)
    }

    pub fn contains_edge(&self, edge: &Edge) -> bool {
        self.edges.contains(edge)
    }

    /// Outgoing edges of `node`, in `(src, dst)` order.
    pub fn out_edges<'a>(&'a self, node: &BlockId) -> impl Iterator<Item = &'a Edge> + 'a {
        edges_from(&self.edges, node)
    }

    pub fn in_degrees(&self) -> BTreeMap<&BlockId, usize> {
        let mut deg: BTreeMap<&BlockId, usize> = self.nodes.iter().map(|n| (n, 0)).collect();
        for e in &self.edges {
            *deg.get_mut(&e.dst).expect("edge endpoint in node set") += 1;
        }
        deg
    }

    /// Nodes reachable from the entry, following edges forward.
    pub fn reachable_from_entry(&self) -> BTreeSet<BlockId> {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::new();
        seen.insert(self.entry.clone());
        queue.push_back(self.entry.clone());
        while let Some(n) = queue.pop_front() {
            for e in self.out_edges(&n) {
                if seen.insert(e.dst.clone()) {
                    queue.push_back(e.dst.clone());
                }
            }
        }
        seen
    }

    /// Drops every node (and incident edge) not reachable from the entry.
    pub fn prune_unreachable(&self) -> ControlFlowGraph {
        let keep = self.reachable_from_entry();
        let edges = self
            .edges
            .iter()
            .filter(|e| keep.contains(&e.src) && keep.contains(&e.dst))
            .cloned()
            .collect();
        ControlFlowGraph {
            nodes: keep,
            edges,
            entry: self.entry.clone(),
        }
    }
}

/// Edges of `set` leaving `node`, in `(src, dst)` order.
pub fn edges_from<'a>(
    set: &'a BTreeSet<Edge>,
    node: &BlockId,
) -> impl Iterator<Item = &'a Edge> + 'a {
    let lo = Edge::new(node.clone(), BlockId::min_bound());
    let node = node.clone();
    set.range(lo..).take_while(move |e| e.src == node)
}

/// Input encodings accepted by [`parse_cfg`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfgFormat {
    Dot,
    GraphMl,
}

impl CfgFormat {
    pub fn from_path(path: &Path) -> Result<Self, CfgError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dot") | Some("gv") => Ok(CfgFormat::Dot),
            Some("graphml") | Some("xml") => Ok(CfgFormat::GraphMl),
            _ => Err(CfgError::UnsupportedFormat(path.display().to_string())),
        }
    }
}

pub fn parse_cfg(text: &str, format: CfgFormat) -> Result<ControlFlowGraph, CfgError> {
    match format {
        CfgFormat::Dot => parse_dot(text),
        CfgFormat::GraphMl => parse_graphml(text),
    }
}

/// Resolves the entry node from explicit markers and in-degrees: a single
/// marked node wins, otherwise the unique node with in-degree zero.
pub(crate) fn resolve_entry(
    nodes: &BTreeSet<BlockId>,
    edges: &BTreeSet<Edge>,
    marked: &BTreeSet<BlockId>,
) -> Result<BlockId, CfgError> {
    match marked.len() {
        1 => return Ok(marked.iter().next().cloned().expect("one marked")),
        0 => {}
        _ => {
            let ids: Vec<&str> = marked.iter().map(BlockId::as_str).collect();
            return Err(CfgError::UnknownEntry(format!(
                "multiple nodes marked entry: {}",
                ids.join(", ")
            )));
        }
    }
    let targets: BTreeSet<&BlockId> = edges.iter().map(|e| &e.dst).collect();
    let roots: Vec<&BlockId> = nodes.iter().filter(|n| !targets.contains(n)).collect();
    match roots.as_slice() {
        [root] => Ok((*root).clone()),
        [] => Err(CfgError::UnknownEntry(
            "no node has in-degree 0 and none is marked entry".into(),
        )),
        many => Err(CfgError::UnknownEntry(format!(
            "{} nodes have in-degree 0 ({}) and none is marked entry",
            many.len(),
            many.iter()
                .map(|b| b.as_str())
                .collect::<Vec<_>>()
                .join(", ")
        ))),
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::ControlFlowGraph;

    pub fn diamond() -> ControlFlowGraph {
        ControlFlowGraph::from_edges(
            "B1",
            [],
            [("B1", "B2"), ("B1", "B3"), ("B2", "B4"), ("B3", "B4")],
        )
        .unwrap()
    }

    pub fn single() -> ControlFlowGraph {
        ControlFlowGraph::from_edges("B1", [], []).unwrap()
    }
}
