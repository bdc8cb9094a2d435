//! Spanning arborescences rooted at the CFG entry.
//!
//! With unit edge weights every spanning arborescence has weight `|N| - 1`,
//! so each one is a minimum spanning arborescence and no contraction step is
//! needed. Extraction is a breadth-first layering from the entry in which a
//! newly reached block takes the lexicographically smallest available
//! incoming edge from the previous layer. That rule is a pure function of
//! the graph, so replicas holding equal graphs always extract equal sets.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::cfg::{edges_from, to_dot, BlockId, ControlFlowGraph, Edge};
use crate::signature::{canonicalize, CanonicalString};

pub use oracle::{
    enumerate_all_arborescences, max_edge_disjoint_packing, OracleError, ORACLE_LIMIT,
};

/// Spanning tree of a CFG with every edge directed away from `root`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Arborescence {
    root: BlockId,
    nodes: BTreeSet<BlockId>,
    edges: BTreeSet<Edge>,
}

impl Arborescence {
    /// Assembles an arborescence from parts; [`Arborescence::check`] is the
    /// way to confirm the result is actually spanning.
    pub fn from_parts(root: BlockId, nodes: BTreeSet<BlockId>, edges: BTreeSet<Edge>) -> Self {
        Arborescence { root, nodes, edges }
    }

    pub fn root(&self) -> &BlockId {
        &self.root
    }

    pub fn nodes(&self) -> &BTreeSet<BlockId> {
        &self.nodes
    }

    pub fn edges(&self) -> &BTreeSet<Edge> {
        &self.edges
    }

    /// Total weight under unit edge weights.
    pub fn weight(&self) -> usize {
        self.edges.len()
    }

    pub fn canonical(&self) -> CanonicalString {
        canonicalize(self)
    }

    pub fn is_edge_disjoint(&self, other: &Arborescence) -> bool {
        self.edges.is_disjoint(&other.edges)
    }

    /// Checks the structural invariants against the source graph.
    pub fn check(&self, source: &ControlFlowGraph) -> Result<(), String> {
        if &self.nodes != source.nodes() {
            return Err("node set differs from source graph".into());
        }
        if &self.root != source.entry() {
            return Err(format!(
                "root {} is not the entry {}",
                self.root,
                source.entry()
            ));
        }
        if self.edges.len() + 1 != self.nodes.len() {
            return Err(format!(
                "{} edges for {} nodes",
                self.edges.len(),
                self.nodes.len()
            ));
        }
        if let Some(e) = self.edges.iter().find(|e| !source.contains_edge(e)) {
            return Err(format!("edge {e} is not in the source graph"));
        }
        let mut in_deg: BTreeMap<&BlockId, usize> = BTreeMap::new();
        for e in &self.edges {
            *in_deg.entry(&e.dst).or_default() += 1;
        }
        if in_deg.contains_key(&self.root) {
            return Err("root has an incoming edge".into());
        }
        if let Some((n, d)) = in_deg.iter().find(|(_, d)| **d != 1) {
            return Err(format!("node {n} has in-degree {d}"));
        }
        let tree = ControlFlowGraph::new(self.nodes.clone(), self.edges.clone(), self.root.clone())
            .map_err(|e| e.to_string())?;
        if tree.reachable_from_entry().len() != self.nodes.len() {
            return Err("not every node is reachable from the root".into());
        }
        Ok(())
    }

    /// DOT rendering of the tree, in the same subset the CFG reader accepts.
    pub fn to_dot(&self) -> String {
        let g = ControlFlowGraph::new(self.nodes.clone(), self.edges.clone(), self.root.clone())
            .expect("arborescence edges stay within its node set");
        to_dot(&g)
    }
}

/// Signal that the available edges do not reach every block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NotSpanning {
    pub unreached: BTreeSet<BlockId>,
}

impl fmt::Display for NotSpanning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids: Vec<&str> = self.unreached.iter().map(BlockId::as_str).collect();
        write!(f, "not spanning, unreached: {}", ids.join(","))
    }
}

/// Builds the deterministic BFS arborescence of `g` using only edges in
/// `available`.
pub fn find_arborescence(
    g: &ControlFlowGraph,
    available: &BTreeSet<Edge>,
) -> Result<Arborescence, NotSpanning> {
    let mut reached: BTreeSet<&BlockId> = BTreeSet::new();
    reached.insert(g.entry());
    let mut layer: Vec<&BlockId> = vec![g.entry()];
    let mut edges = BTreeSet::new();
    while !layer.is_empty() {
        // Smallest candidate parent edge per newly reached block.
        let mut chosen: BTreeMap<&BlockId, &Edge> = BTreeMap::new();
        for &u in &layer {
            for e in edges_from(available, u) {
                if reached.contains(&e.dst) || e.is_self_loop() {
                    continue;
                }
                chosen
                    .entry(&e.dst)
                    .and_modify(|best| {
                        if e < *best {
                            *best = e;
                        }
                    })
                    .or_insert(e);
            }
        }
        layer = chosen.keys().copied().collect();
        for (dst, e) in chosen {
            reached.insert(dst);
            edges.insert(e.clone());
        }
    }
    if reached.len() != g.node_count() {
        let unreached = g
            .nodes()
            .iter()
            .filter(|n| !reached.contains(n))
            .cloned()
            .collect();
        return Err(NotSpanning { unreached });
    }
    Ok(Arborescence {
        root: g.entry().clone(),
        nodes: g.nodes().clone(),
        edges,
    })
}

/// Edge-disjoint arborescences listed by ascending canonical string.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArborescenceSet {
    items: Vec<Arborescence>,
}

impl ArborescenceSet {
    /// Sorts `items` into canonical order. Returns `None` when two members
    /// share an edge.
    pub fn new(mut items: Vec<Arborescence>) -> Option<Self> {
        for (i, a) in items.iter().enumerate() {
            if items[i + 1..].iter().any(|b| !a.is_edge_disjoint(b)) {
                return None;
            }
        }
        items.sort_by_cached_key(Arborescence::canonical);
        Some(ArborescenceSet { items })
    }

    pub fn items(&self) -> &[Arborescence] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Arborescence> {
        self.items.iter()
    }
}

impl<'a> IntoIterator for &'a ArborescenceSet {
    type Item = &'a Arborescence;
    type IntoIter = std::slice::Iter<'a, Arborescence>;

    fn into_iter(self) -> Self::IntoIter {
        self.items.iter()
    }
}

/// Greedily peels edge-disjoint arborescences: extract one from the
/// remaining edges, delete its edges, repeat until the remainder no longer
/// spans. A single-block graph yields one empty arborescence.
///
/// The greedy count can fall short of the maximum packing; both replicas run
/// the same procedure, so their sets still agree. Because a BFS tree uses
/// every edge leaving the entry, a graph with two or more blocks always
/// peels to exactly one arborescence.
pub fn peel_edge_disjoint(g: &ControlFlowGraph) -> ArborescenceSet {
    let mut remaining: BTreeSet<Edge> = g
        .edges()
        .iter()
        .filter(|e| !e.is_self_loop())
        .cloned()
        .collect();
    let mut items = Vec::new();
    while let Ok(a) = find_arborescence(g, &remaining) {
        let empty = a.edges.is_empty();
        for e in &a.edges {
            remaining.remove(e);
        }
        items.push(a);
        if empty {
            break;
        }
    }
    ArborescenceSet::new(items).expect("peeled arborescences are edge-disjoint")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{fixtures, generate_synthetic, SyntheticSpec};
    use proptest::prelude::*;

    fn edge_strings(a: &Arborescence) -> Vec<String> {
        a.edges().iter().map(Edge::to_string).collect()
    }

    fn edge_set(g: &ControlFlowGraph, pairs: &[(&str, &str)]) -> BTreeSet<Edge> {
        let want: BTreeSet<String> = pairs.iter().map(|(s, d)| format!("{s}>{d}")).collect();
        g.edges()
            .iter()
            .filter(|e| want.contains(&e.to_string()))
            .cloned()
            .collect()
    }

    #[test]
    fn diamond_bfs_prefers_smaller_parent() {
        let g = fixtures::diamond();
        let a = find_arborescence(&g, g.edges()).unwrap();
        assert_eq!(edge_strings(&a), ["B1>B2", "B1>B3", "B2>B4"]);
        a.check(&g).unwrap();
    }

    #[test]
    fn single_node_gives_empty_tree() {
        let g = fixtures::single();
        let a = find_arborescence(&g, g.edges()).unwrap();
        assert!(a.edges().is_empty());
        a.check(&g).unwrap();
    }

    #[test]
    fn restricted_edges_report_not_spanning() {
        let g = fixtures::diamond();
        let avail = edge_set(&g, &[("B1", "B2"), ("B2", "B4")]);
        let err = find_arborescence(&g, &avail).unwrap_err();
        assert_eq!(
            err.unreached
                .iter()
                .map(BlockId::as_str)
                .collect::<Vec<_>>(),
            ["B3"]
        );
    }

    #[test]
    fn parent_must_come_from_previous_layer() {
        // B3 is reachable in one hop from B1 and also from B2 in the same
        // layer; only the B1 edge is a candidate.
        let g = ControlFlowGraph::from_edges("B1", [], [("B1", "B2"), ("B1", "B3"), ("B2", "B3")])
            .unwrap();
        let a = find_arborescence(&g, g.edges()).unwrap();
        assert_eq!(edge_strings(&a), ["B1>B2", "B1>B3"]);
    }

    #[test]
    fn diamond_peels_to_one() {
        let set = peel_edge_disjoint(&fixtures::diamond());
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn single_node_peels_to_one_empty() {
        let set = peel_edge_disjoint(&fixtures::single());
        assert_eq!(set.len(), 1);
        assert!(set.items()[0].edges().is_empty());
    }

    #[test]
    fn greedy_peel_can_fall_short_of_packing() {
        // {B1>B2, B2>B3} and {B1>B3, B3>B2} are disjoint, but the BFS tree
        // takes both root edges first.
        let g = ControlFlowGraph::from_edges(
            "B1",
            [],
            [("B1", "B2"), ("B1", "B3"), ("B2", "B3"), ("B3", "B2")],
        )
        .unwrap();
        let set = peel_edge_disjoint(&g);
        assert_eq!(set.len(), 1);
        assert_eq!(max_edge_disjoint_packing(&g).unwrap(), 2);
    }

    #[test]
    fn set_rejects_overlapping_members() {
        let g = fixtures::diamond();
        let a = find_arborescence(&g, g.edges()).unwrap();
        assert!(ArborescenceSet::new(vec![a.clone(), a]).is_none());
    }

    #[test]
    fn debug_dot_export_lists_tree_edges() {
        let g = fixtures::diamond();
        let a = find_arborescence(&g, g.edges()).unwrap();
        let dot = a.to_dot();
        assert!(dot.contains("B2 -> B4;"));
        assert!(!dot.contains("B3 -> B4;"));
    }

    proptest! {
        #[test]
        fn peeled_members_satisfy_invariants(n in 1usize..30, density in 0.0f64..0.5, seed in any::<u64>()) {
            let g = generate_synthetic(SyntheticSpec::new(n, density, seed)).unwrap();
            let set = peel_edge_disjoint(&g);
            prop_assert!(!set.is_empty());
            for a in &set {
                prop_assert_eq!(a.check(&g), Ok(()));
                prop_assert_eq!(a.weight(), n - 1);
            }
            for (i, a) in set.items().iter().enumerate() {
                for b in &set.items()[i + 1..] {
                    prop_assert!(a.is_edge_disjoint(b));
                }
            }
            let again = peel_edge_disjoint(&g);
            prop_assert_eq!(set, again);
        }

        #[test]
        fn first_tree_takes_every_entry_edge(n in 2usize..30, density in 0.0f64..0.8, seed in any::<u64>()) {
            // Entry successors all sit in the first BFS layer, so no entry
            // edge is left for a second tree.
            let g = generate_synthetic(SyntheticSpec::new(n, density, seed)).unwrap();
            let first = find_arborescence(&g, g.edges()).unwrap();
            for e in g.out_edges(g.entry()) {
                prop_assert!(first.edges().contains(e));
            }
            prop_assert_eq!(peel_edge_disjoint(&g).len(), 1);
        }
    }
}
