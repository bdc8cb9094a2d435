use std::fmt;

use super::{BlockId, ControlFlowGraph, Edge};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    SelfLoop(BlockId),
    UnreachableNode(BlockId),
    /// Only reachable through hand-built values; the constructors reject it.
    DanglingEdge(Edge),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::SelfLoop(b) => write!(f, "SelfLoop({b})"),
            Violation::UnreachableNode(b) => write!(f, "UnreachableNode({b})"),
            Violation::DanglingEdge(e) => write!(f, "DanglingEdge({e})"),
        }
    }
}

/// Outcome of [`validate_cfg`]: an empty violation list means the graph can
/// be signed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// True when the only problems are unreachable nodes, which pruning fixes.
    pub fn only_unreachable(&self) -> bool {
        self.violations
            .iter()
            .all(|v| matches!(v, Violation::UnreachableNode(_)))
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return f.write_str("OK");
        }
        let parts: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&parts.join(", "))
    }
}

pub fn validate_cfg(g: &ControlFlowGraph) -> ValidationReport {
    let mut violations = Vec::new();
    for e in g.edges() {
        if !g.contains_node(&e.src) || !g.contains_node(&e.dst) {
            violations.push(Violation::DanglingEdge(e.clone()));
        } else if e.is_self_loop() {
            violations.push(Violation::SelfLoop(e.src.clone()));
        }
    }
    let reachable = g.reachable_from_entry();
    violations.extend(
        g.nodes()
            .iter()
            .filter(|n| !reachable.contains(*n))
            .map(|n| Violation::UnreachableNode(n.clone())),
    );
    violations.sort();
    ValidationReport { violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfg::{fixtures, parse_dot};

    #[test]
    fn diamond_is_valid() {
        assert!(validate_cfg(&fixtures::diamond()).is_ok());
        assert!(validate_cfg(&fixtures::single()).is_ok());
    }

    #[test]
    fn isolated_node_is_unreachable() {
        let g =
            parse_dot("digraph g { B1 [entry=true]; B1 -> B2; B1 -> B3; B2 -> B4; B3 -> B4; B9; }")
                .unwrap();
        let report = validate_cfg(&g);
        assert_eq!(
            report.violations,
            vec![Violation::UnreachableNode(BlockId::new("B9").unwrap())]
        );
        assert!(report.only_unreachable());
        assert_eq!(report.to_string(), "UnreachableNode(B9)");
    }

    #[test]
    fn self_loop_is_reported() {
        let g =
            parse_dot("digraph g { B1 -> B2; B1 -> B3; B2 -> B4; B3 -> B4; B4 -> B4; }").unwrap();
        let report = validate_cfg(&g);
        assert_eq!(
            report.violations,
            vec![Violation::SelfLoop(BlockId::new("B4").unwrap())]
        );
        assert!(!report.only_unreachable());
    }

    #[test]
    fn lone_self_loop_parses_then_fails_validation() {
        let g = parse_dot("digraph g { B1 [entry=true]; B1 -> B1; }").unwrap();
        let report = validate_cfg(&g);
        assert_eq!(
            report.violations,
            vec![Violation::SelfLoop(BlockId::new("B1").unwrap())]
        );
    }
}
