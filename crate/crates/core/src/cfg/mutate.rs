//! Tamper mutations: small structural edits that model an attacker altering
//! a program's control flow.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{validate_cfg, BlockId, ControlFlowGraph, Edge, ValidationReport};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Mutation {
    AddEdge(Edge),
    RemoveEdge(Edge),
    /// Retarget `edge` so it points at `new_dst`.
    RedirectEdge {
        edge: Edge,
        new_dst: BlockId,
    },
    /// Exchange the ids of two blocks; edges follow the blocks.
    SwapNodeIds(BlockId, BlockId),
    /// Delete a block and every incident edge.
    RemoveNode(BlockId),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MutateError {
    #[error("invalid mutation: {0}")]
    InvalidMutation(String),
    #[error("mutation produces an invalid graph: {0}")]
    ProducesInvalidGraph(String),
}

impl MutateError {
    fn from_report(report: &ValidationReport) -> Self {
        MutateError::ProducesInvalidGraph(report.to_string())
    }
}

fn require_node(g: &ControlFlowGraph, id: &BlockId) -> Result<(), MutateError> {
    if g.contains_node(id) {
        Ok(())
    } else {
        Err(MutateError::InvalidMutation(format!("no such node {id}")))
    }
}

fn require_edge(g: &ControlFlowGraph, edge: &Edge) -> Result<(), MutateError> {
    if g.contains_edge(edge) {
        Ok(())
    } else {
        Err(MutateError::InvalidMutation(format!("no such edge {edge}")))
    }
}

fn require_absent(g: &ControlFlowGraph, edge: &Edge) -> Result<(), MutateError> {
    if g.contains_edge(edge) {
        Err(MutateError::InvalidMutation(format!(
            "edge {edge} already exists"
        )))
    } else {
        Ok(())
    }
}

/// Applies `m` without any validation of the result.
fn apply(g: &ControlFlowGraph, m: &Mutation) -> Result<ControlFlowGraph, MutateError> {
    let mut nodes = g.nodes().clone();
    let mut edges = g.edges().clone();
    let mut entry = g.entry().clone();
    match m {
        Mutation::AddEdge(e) => {
            require_node(g, &e.src)?;
            require_node(g, &e.dst)?;
            require_absent(g, e)?;
            edges.insert(e.clone());
        }
        Mutation::RemoveEdge(e) => {
            require_edge(g, e)?;
            edges.remove(e);
        }
        Mutation::RedirectEdge { edge, new_dst } => {
            require_edge(g, edge)?;
            require_node(g, new_dst)?;
            let moved = Edge::new(edge.src.clone(), new_dst.clone());
            require_absent(g, &moved)?;
            edges.remove(edge);
            edges.insert(moved);
        }
        Mutation::SwapNodeIds(a, b) => {
            require_node(g, a)?;
            require_node(g, b)?;
            if a == b {
                return Err(MutateError::InvalidMutation(format!(
                    "cannot swap {a} with itself"
                )));
            }
            let swap = |id: &BlockId| {
                if id == a {
                    b.clone()
                } else if id == b {
                    a.clone()
                } else {
                    id.clone()
                }
            };
            edges = edges
                .iter()
                .map(|e| Edge::new(swap(&e.src), swap(&e.dst)))
                .collect();
            entry = swap(&entry);
        }
        Mutation::RemoveNode(id) => {
            require_node(g, id)?;
            if id == g.entry() {
                return Err(MutateError::ProducesInvalidGraph(format!(
                    "removing entry node {id}"
                )));
            }
            nodes.remove(id);
            edges.retain(|e| &e.src != id && &e.dst != id);
        }
    }
    ControlFlowGraph::new(nodes, edges, entry)
        .map_err(|e| MutateError::InvalidMutation(e.to_string()))
}

/// Returns a mutated copy of `g`. The result always passes [`validate_cfg`];
/// mutations that would break reachability or add a self-loop are reported
/// as [`MutateError::ProducesInvalidGraph`].
pub fn mutate(g: &ControlFlowGraph, m: &Mutation) -> Result<ControlFlowGraph, MutateError> {
    let out = apply(g, m)?;
    let report = validate_cfg(&out);
    if report.is_ok() {
        Ok(out)
    } else {
        Err(MutateError::from_report(&report))
    }
}

/// Like [`mutate`], but blocks cut off from the entry are pruned instead of
/// reported. Self-loops and entry removal are still errors.
pub fn mutate_pruned(g: &ControlFlowGraph, m: &Mutation) -> Result<ControlFlowGraph, MutateError> {
    let out = apply(g, m)?;
    let report = validate_cfg(&out);
    if report.is_ok() {
        Ok(out)
    } else if report.only_unreachable() {
        Ok(out.prune_unreachable())
    } else {
        Err(MutateError::from_report(&report))
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mutation::AddEdge(e) => write!(f, "add:{e}"),
            Mutation::RemoveEdge(e) => write!(f, "remove:{e}"),
            Mutation::RedirectEdge { edge, new_dst } => write!(f, "redirect:{edge}:{new_dst}"),
            Mutation::SwapNodeIds(a, b) => write!(f, "swap:{a},{b}"),
            Mutation::RemoveNode(id) => write!(f, "remove-node:{id}"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("bad mutation spec {spec:?}: {reason}")]
pub struct MutationParseError {
    spec: String,
    reason: String,
}

impl FromStr for Mutation {
    type Err = MutationParseError;

    /// Text forms: `add:A>B`, `remove:A>B`, `redirect:A>B:C`, `swap:A,B`,
    /// `remove-node:A`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: &str| MutationParseError {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        let id = |t: &str| BlockId::new(t.trim()).map_err(|e| err(&e.to_string()));
        let edge = |t: &str| {
            let (a, b) = t.split_once('>').ok_or_else(|| err("expected SRC>DST"))?;
            Ok::<_, MutationParseError>(Edge::new(id(a)?, id(b)?))
        };
        let (kind, rest) = s
            .trim()
            .split_once(':')
            .ok_or_else(|| err("expected KIND:OPERANDS"))?;
        match kind {
            "add" => Ok(Mutation::AddEdge(edge(rest)?)),
            "remove" => Ok(Mutation::RemoveEdge(edge(rest)?)),
            "redirect" => {
                let (e, to) = rest
                    .split_once(':')
                    .ok_or_else(|| err("expected SRC>DST:NEW"))?;
                Ok(Mutation::RedirectEdge {
                    edge: edge(e)?,
                    new_dst: id(to)?,
                })
            }
            "swap" => {
                let (a, b) = rest.split_once(',').ok_or_else(|| err("expected A,B"))?;
                Ok(Mutation::SwapNodeIds(id(a)?, id(b)?))
            }
            "remove-node" => Ok(Mutation::RemoveNode(id(rest)?)),
            _ => Err(err("unknown mutation kind")),
        }
    }
}
