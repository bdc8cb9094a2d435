use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BlockId, CfgError, ControlFlowGraph, Edge};

/// Parameters for [`generate_synthetic`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub node_count: usize,
    /// Probability that each ordered pair of distinct nodes not already on
    /// the backbone receives an extra edge.
    pub edge_density: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(node_count: usize, edge_density: f64, seed: u64) -> Self {
        SyntheticSpec {
            node_count,
            edge_density,
            seed,
        }
    }
}

/// Block ids `B1..Bn`, zero-padded so byte order equals numeric order.
pub(crate) fn block_names(n: usize) -> Vec<BlockId> {
    let width = n.to_string().len();
    (1..=n)
        .map(|i| BlockId::new(format!("B{i:0width$}")).expect("generated id is valid"))
        .collect()
}

/// Generates a random CFG that always passes validation: a random spanning
/// arborescence rooted at the first block is laid down first, then every
/// other ordered pair of distinct blocks gets an edge with probability
/// `edge_density`. Pure function of `spec`.
pub fn generate_synthetic(spec: SyntheticSpec) -> Result<ControlFlowGraph, CfgError> {
    if spec.node_count == 0 {
        return Err(CfgError::InvalidSpec(
            "node_count must be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.edge_density) {
        return Err(CfgError::InvalidSpec(format!(
            "edge_density must lie in [0, 1], got {}",
            spec.edge_density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = block_names(spec.node_count);
    let mut edges = BTreeSet::new();
    for child in 1..names.len() {
        let parent = rng.gen_range(0..child);
        edges.insert(Edge::new(names[parent].clone(), names[child].clone()));
    }
    for src in &names {
        for dst in &names {
            if src == dst {
                continue;
            }
            let edge = Edge::new(src.clone(), dst.clone());
            // Draw for every pair so the stream position does not depend on
            // which pairs the backbone already covers.
            let hit = rng.gen_bool(spec.edge_density);
            if hit {
                edges.insert(edge);
            }
        }
    }
    let entry = names[0].clone();
    ControlFlowGraph::new(names.into_iter().collect(), edges, entry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{to_dot, validate_cfg};
    use proptest::prelude::*;

    #[test]
    fn single_node_spec() {
        let g = generate_synthetic(SyntheticSpec::new(1, 0.0, 42)).unwrap();
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let a = generate_synthetic(SyntheticSpec::new(6, 0.3, 7)).unwrap();
        let b = generate_synthetic(SyntheticSpec::new(6, 0.3, 7)).unwrap();
        assert_eq!(to_dot(&a), to_dot(&b));
    }

    #[test]
    fn different_seeds_give_frozen_different_graphs() {
        let a = generate_synthetic(SyntheticSpec::new(6, 0.3, 7)).unwrap();
        let b = generate_synthetic(SyntheticSpec::new(6, 0.3, 8)).unwrap();
        assert_ne!(a.edges(), b.edges());
    }

    #[test]
    fn zero_density_yields_backbone_only() {
        let g = generate_synthetic(SyntheticSpec::new(20, 0.0, 3)).unwrap();
        assert_eq!(g.edge_count(), 19);
    }

    #[test]
    fn full_density_yields_complete_digraph() {
        let g = generate_synthetic(SyntheticSpec::new(5, 1.0, 3)).unwrap();
        assert_eq!(g.edge_count(), 20);
    }

    #[test]
    fn rejects_invalid_specs() {
        for spec in [
            SyntheticSpec::new(0, 0.1, 1),
            SyntheticSpec::new(3, -0.1, 1),
            SyntheticSpec::new(3, 1.5, 1),
            SyntheticSpec::new(3, f64::NAN, 1),
        ] {
            assert!(matches!(
                generate_synthetic(spec),
                Err(CfgError::InvalidSpec(_))
            ));
        }
    }

    #[test]
    fn names_sort_numerically() {
        let names = block_names(12);
        assert_eq!(names[0].as_str(), "B01");
        assert!(names.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn generated_graphs_validate(n in 1usize..40, density in 0.0f64..=1.0, seed in any::<u64>()) {
            let g = generate_synthetic(SyntheticSpec::new(n, density, seed)).unwrap();
            prop_assert!(validate_cfg(&g).is_ok());
            prop_assert_eq!(g.node_count(), n);
            prop_assert!(g.edge_count() >= n - 1);
        }
    }
}
