//! Exhaustive enumeration of spanning arborescences and maximum
//! edge-disjoint packing. Exponential; intended as a test oracle for small
//! graphs only.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::Arborescence;
use crate::cfg::{BlockId, ControlFlowGraph, Edge};

/// Enumeration refuses graphs whose product of per-block in-degrees exceeds
/// this many parent choices.
pub const ORACLE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "graph too large for exhaustive enumeration ({choices} parent choices, limit {limit})"
    )]
    TooLarge { choices: u64, limit: u64 },
}

/// Incoming edges for every non-root block, self-loops and edges into the
/// root excluded.
fn parent_choices(g: &ControlFlowGraph) -> Vec<(&BlockId, Vec<&Edge>)> {
    let mut incoming: BTreeMap<&BlockId, Vec<&Edge>> = g
        .nodes()
        .iter()
        .filter(|n| *n != g.entry())
        .map(|n| (n, Vec::new()))
        .collect();
    for e in g.edges() {
        if e.is_self_loop() {
            continue;
        }
        if let Some(list) = incoming.get_mut(&e.dst) {
            list.push(e);
        }
    }
    incoming.into_iter().collect()
}

fn choice_count(choices: &[(&BlockId, Vec<&Edge>)]) -> u64 {
    choices
        .iter()
        .fold(1u64, |acc, (_, opts)| acc.saturating_mul(opts.len() as u64))
}

/// Every spanning arborescence of `g` rooted at its entry, in canonical
/// order. Each non-root block picks one incoming edge; a pick survives when
/// following parents from every block ends at the root.
pub fn enumerate_all_arborescences(g: &ControlFlowGraph) -> Result<Vec<Arborescence>, OracleError> {
    let choices = parent_choices(g);
    let total = choice_count(&choices);
    if total > ORACLE_LIMIT {
        return Err(OracleError::TooLarge {
            choices: total,
            limit: ORACLE_LIMIT,
        });
    }
    if choices.iter().any(|(_, opts)| opts.is_empty()) {
        return Ok(Vec::new());
    }

    let index: BTreeMap<&BlockId, usize> = choices
        .iter()
        .enumerate()
        .map(|(i, (n, _))| (*n, i))
        .collect();
    let root = g.entry();
    let mut picks = vec![0usize; choices.len()];
    let mut found = Vec::new();
    // 0 = unknown, 1 = on current walk, 2 = reaches root
    let mut state = vec![0u8; choices.len()];
    loop {
        state.iter_mut().for_each(|s| *s = 0);
        let mut ok = true;
        'nodes: for start in 0..choices.len() {
            let mut path = Vec::new();
            let mut cur = start;
            loop {
                match state[cur] {
                    2 => break,
                    1 => {
                        ok = false;
                        break 'nodes;
                    }
                    _ => {}
                }
                state[cur] = 1;
                path.push(cur);
                let parent = &choices[cur].1[picks[cur]].src;
                if parent == root {
                    break;
                }
                cur = index[parent];
            }
            for p in path {
                state[p] = 2;
            }
        }
        if ok {
            let edges: BTreeSet<Edge> = choices
                .iter()
                .zip(&picks)
                .map(|((_, opts), &k)| opts[k].clone())
                .collect();
            found.push(Arborescence::from_parts(
                root.clone(),
                g.nodes().clone(),
                edges,
            ));
        }

        // Odometer step.
        let mut i = 0;
        loop {
            if i == picks.len() {
                found.sort_by_cached_key(Arborescence::canonical);
                return Ok(found);
            }
            picks[i] += 1;
            if picks[i] < choices[i].1.len() {
                break;
            }
            picks[i] = 0;
            i += 1;
        }
    }
}

/// Largest number of pairwise edge-disjoint spanning arborescences, found by
/// branch-and-bound over subsets of the full enumeration.
pub fn max_edge_disjoint_packing(g: &ControlFlowGraph) -> Result<usize, OracleError> {
    let all = enumerate_all_arborescences(g)?;
    if all.is_empty() {
        return Ok(0);
    }
    if g.node_count() == 1 {
        return Ok(1);
    }
    let edge_index: BTreeMap<&Edge, usize> =
        g.edges().iter().enumerate().map(|(i, e)| (e, i)).collect();
    let words = g.edge_count().div_ceil(64);
    let masks: Vec<Vec<u64>> = all
        .iter()
        .map(|a| {
            let mut m = vec![0u64; words];
            for e in a.edges() {
                let i = edge_index[e];
                m[i / 64] |= 1 << (i % 64);
            }
            m
        })
        .collect();
    // No packing can exceed the smallest in-degree of a non-root block or
    // the out-degree of the root.
    let bound = parent_choices(g)
        .iter()
        .map(|(_, opts)| opts.len())
        .chain(std::iter::once(g.out_edges(g.entry()).count()))
        .min()
        .unwrap_or(1);

    let candidates: Vec<usize> = (0..masks.len()).collect();
    let mut best = 1;
    search(&masks, &candidates, 0, bound, &mut best);
    Ok(best)
}

fn disjoint(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x & y == 0)
}

fn search(masks: &[Vec<u64>], candidates: &[usize], depth: usize, bound: usize, best: &mut usize) {
    if depth > *best {
        *best = depth;
    }
    if *best >= bound {
        return;
    }
    for (pos, &c) in candidates.iter().enumerate() {
        if depth + (candidates.len() - pos) <= *best {
            return;
        }
        let next: Vec<usize> = candidates[pos + 1..]
            .iter()
            .copied()
            .filter(|&o| disjoint(&masks[c], &masks[o]))
            .collect();
        search(masks, &next, depth + 1, bound, best);
        if *best >= bound {
            return;
        }
    }
}
