//! Perfect-match comparison of two process signatures.
//!
//! Two signatures match only when they use the same hash algorithm and hold
//! exactly the same digest set. Both lists are sorted, so a single merge walk
//! decides equality in at most `s1 + s2` digest comparisons, well inside the
//! quadratic bound of pairwise search.

use std::cmp::Ordering;
use std::fmt;

use crate::signature::{HashAlgorithm, ProcessSignature};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Match,
    Mismatch,
}

/// Which signature holds a digest the other one lacks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Local,
    Remote,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum MatchDetail {
    Equal,
    SizeDiffer {
        local: usize,
        remote: usize,
    },
    MissingDigest {
        digest: String,
        present_in: Side,
    },
    AlgorithmDiffer {
        local: HashAlgorithm,
        remote: HashAlgorithm,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MatchVerdict {
    detail: MatchDetail,
}

impl MatchVerdict {
    pub fn outcome(&self) -> Outcome {
        if self.detail == MatchDetail::Equal {
            Outcome::Match
        } else {
            Outcome::Mismatch
        }
    }

    pub fn detail(&self) -> &MatchDetail {
        &self.detail
    }

    pub fn is_match(&self) -> bool {
        self.outcome() == Outcome::Match
    }
}

impl fmt::Display for MatchDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchDetail::Equal => f.write_str("Equal"),
            MatchDetail::SizeDiffer { local, remote } => write!(f, "SizeDiffer({local},{remote})"),
            MatchDetail::MissingDigest { digest, present_in } => {
                let missing_from = match present_in {
                    Side::Local => "remote",
                    Side::Remote => "local",
                };
                write!(f, "MissingDigest({digest},missing-from-{missing_from})")
            }
            MatchDetail::AlgorithmDiffer { local, remote } => {
                write!(f, "AlgorithmDiffer({local},{remote})")
            }
        }
    }
}

/// `MATCH` or `MISMATCH <detail>`.
impl fmt::Display for MatchVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.outcome() {
            Outcome::Match => f.write_str("MATCH"),
            Outcome::Mismatch => write!(f, "MISMATCH {}", self.detail),
        }
    }
}

/// Compares two signatures and also reports how many digest comparisons the
/// merge walk performed.
pub fn match_with_cost(
    local: &ProcessSignature,
    remote: &ProcessSignature,
) -> (MatchVerdict, usize) {
    if local.algorithm() != remote.algorithm() {
        let detail = MatchDetail::AlgorithmDiffer {
            local: local.algorithm(),
            remote: remote.algorithm(),
        };
        return (MatchVerdict { detail }, 0);
    }
    if local.len() != remote.len() {
        let detail = MatchDetail::SizeDiffer {
            local: local.len(),
            remote: remote.len(),
        };
        return (MatchVerdict { detail }, 0);
    }
    let (a, b) = (local.digests(), remote.digests());
    let (mut i, mut j, mut comparisons) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        comparisons += 1;
        match a[i].cmp(&b[j]) {
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
            Ordering::Less => {
                let detail = MatchDetail::MissingDigest {
                    digest: a[i].clone(),
                    present_in: Side::Local,
                };
                return (MatchVerdict { detail }, comparisons);
            }
            Ordering::Greater => {
                let detail = MatchDetail::MissingDigest {
                    digest: b[j].clone(),
                    present_in: Side::Remote,
                };
                return (MatchVerdict { detail }, comparisons);
            }
        }
    }
    (
        MatchVerdict {
            detail: MatchDetail::Equal,
        },
        comparisons,
    )
}

pub fn match_signatures(local: &ProcessSignature, remote: &ProcessSignature) -> MatchVerdict {
    match_with_cost(local, remote).0
}

/// Number of digest comparisons [`match_signatures`] performs.
pub fn match_cost(local: &ProcessSignature, remote: &ProcessSignature) -> usize {
    match_with_cost(local, remote).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arborescence::peel_edge_disjoint;
    use crate::cfg::{fixtures, mutate, BlockId, Edge, Mutation};
    use crate::signature::build_signature;
    use proptest::prelude::*;

    fn sig(digests: &[&str]) -> ProcessSignature {
        ProcessSignature::new(
            HashAlgorithm::Md5,
            digests.iter().map(|d| d.repeat(32)).collect(),
            "t",
        )
        .unwrap()
    }

    #[test]
    fn identical_signatures_match() {
        let s = sig(&["a", "b"]);
        let v = match_signatures(&s, &s);
        assert!(v.is_match());
        assert_eq!(v.to_string(), "MATCH");
    }

    #[test]
    fn mutated_diamond_mismatches() {
        let g = fixtures::diamond();
        let m = Mutation::RemoveEdge(Edge::new(
            BlockId::new("B2").unwrap(),
            BlockId::new("B4").unwrap(),
        ));
        let tampered = mutate(&g, &m).unwrap();
        let a = build_signature(&peel_edge_disjoint(&g), HashAlgorithm::Md5, "diamond");
        let b = build_signature(
            &peel_edge_disjoint(&tampered),
            HashAlgorithm::Md5,
            "diamond",
        );
        let v = match_signatures(&a, &b);
        assert_eq!(v.outcome(), Outcome::Mismatch);
        assert!(matches!(v.detail(), MatchDetail::MissingDigest { .. }));
    }

    #[test]
    fn size_difference_is_reported_first() {
        let v = match_signatures(&sig(&["1", "2"]), &sig(&["1"]));
        assert_eq!(
            v.detail(),
            &MatchDetail::SizeDiffer {
                local: 2,
                remote: 1
            }
        );
        assert_eq!(v.to_string(), "MISMATCH SizeDiffer(2,1)");
    }

    #[test]
    fn algorithm_difference_is_reported() {
        let md5 = sig(&["1"]);
        let sha1 = ProcessSignature::new(HashAlgorithm::Sha1, vec!["1".repeat(40)], "t").unwrap();
        let v = match_signatures(&md5, &sha1);
        assert_eq!(v.to_string(), "MISMATCH AlgorithmDiffer(MD5,SHA1)");
    }

    #[test]
    fn missing_digest_names_the_side() {
        let v = match_signatures(&sig(&["1", "3"]), &sig(&["1", "2"]));
        assert_eq!(
            v.detail(),
            &MatchDetail::MissingDigest {
                digest: "2".repeat(32),
                present_in: Side::Remote
            }
        );
    }

    #[test]
    fn cost_examples() {
        assert!(match_cost(&sig(&["1"]), &sig(&["1"])) <= 2);
        let k = sig(&["1", "2", "3", "4", "5"]);
        assert!(match_cost(&k, &k) <= 10);
        assert_eq!(match_cost(&k, &k), 5);
    }

    fn arb_sig() -> impl Strategy<Value = ProcessSignature> {
        proptest::collection::btree_set("[0-3]", 1..5).prop_map(|set| {
            let digests: Vec<String> = set.into_iter().map(|d| d.repeat(32)).collect();
            ProcessSignature::new(HashAlgorithm::Md5, digests, "p").unwrap()
        })
    }

    proptest! {
        #[test]
        fn outcome_is_symmetric_and_equals_set_equality(a in arb_sig(), b in arb_sig()) {
            let ab = match_signatures(&a, &b);
            let ba = match_signatures(&b, &a);
            prop_assert_eq!(ab.outcome(), ba.outcome());
            prop_assert_eq!(ab.is_match(), a.digests() == b.digests());
            prop_assert!(match_signatures(&a, &a).is_match());
        }

        #[test]
        fn cost_stays_within_bounds(a in arb_sig(), b in arb_sig()) {
            let cost = match_cost(&a, &b);
            prop_assert!(cost <= a.len() + b.len());
            if a.len() >= 2 && b.len() >= 2 {
                prop_assert!(cost <= a.len() * b.len());
            }
        }
    }
}
