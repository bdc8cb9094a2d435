//! Vote tally. A node is flagged when a strict majority of the cluster
//! (counting every configured replica, so silent ones weaken the quorum)
//! reports a mismatch on it. Flags only stand when the unflagged replicas
//! are themselves a strict majority; otherwise nobody can be trusted to have
//! the reference copy and the round is inconclusive.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::wire::VoteMessage;
use super::NodeId;
use crate::matcher::Outcome;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Verdict {
    Clean,
    IntrusionAt(BTreeSet<NodeId>),
    /// Mismatch votes exist but none reaches a majority.
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Clean => f.write_str("CLEAN"),
            Verdict::IntrusionAt(nodes) => {
                let ids: Vec<String> = nodes.iter().map(NodeId::to_string).collect();
                write!(f, "INTRUSION node={}", ids.join(","))
            }
            Verdict::Inconclusive => f.write_str("INCONCLUSIVE"),
        }
    }
}

/// Votes with one entry per (sender, subject). Self-votes and votes from or
/// about ids outside the cluster are dropped; a pair reported both ways
/// counts as a mismatch.
fn dedup_votes(n: usize, votes: &[VoteMessage]) -> BTreeMap<(NodeId, NodeId), Outcome> {
    let mut table = BTreeMap::new();
    for v in votes {
        if v.sender() == v.subject() || v.sender().index() >= n || v.subject().index() >= n {
            continue;
        }
        table
            .entry((v.sender(), v.subject()))
            .and_modify(|o| {
                if v.outcome() == Outcome::Mismatch {
                    *o = Outcome::Mismatch;
                }
            })
            .or_insert(v.outcome());
    }
    table
}

/// Applies the majority rule for a cluster of `n` replicas.
pub fn tally(n: usize, votes: &[VoteMessage]) -> Verdict {
    let table = dedup_votes(n, votes);
    let mut against: BTreeMap<NodeId, usize> = BTreeMap::new();
    for ((_, subject), outcome) in &table {
        if *outcome == Outcome::Mismatch {
            *against.entry(*subject).or_default() += 1;
        }
    }
    if against.is_empty() {
        return Verdict::Clean;
    }
    let flagged: BTreeSet<NodeId> = against
        .into_iter()
        .filter(|(_, count)| 2 * count > n)
        .map(|(node, _)| node)
        .collect();
    if flagged.is_empty() || 2 * (n - flagged.len()) <= n {
        Verdict::Inconclusive
    } else {
        Verdict::IntrusionAt(flagged)
    }
}

/// One node's record of a finished round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConsensusRound {
    pub process_label: String,
    /// Digests this node saw per replica: its own plus every peer signature
    /// it could decrypt.
    pub digests: BTreeMap<NodeId, Vec<String>>,
    /// Deduplicated votes, ordered by (sender, subject).
    pub votes: Vec<VoteMessage>,
    pub verdict: Verdict,
}

impl ConsensusRound {
    pub fn conclude(
        n: usize,
        process_label: String,
        digests: BTreeMap<NodeId, Vec<String>>,
        votes: &[VoteMessage],
    ) -> Self {
        let verdict = tally(n, votes);
        let votes = dedup_votes(n, votes)
            .into_iter()
            .filter_map(|((s, t), o)| VoteMessage::new(s, t, o))
            .collect();
        ConsensusRound {
            process_label,
            digests,
            votes,
            verdict,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vote(s: u16, t: u16, mismatch: bool) -> VoteMessage {
        let o = if mismatch {
            Outcome::Mismatch
        } else {
            Outcome::Match
        };
        VoteMessage::new(NodeId(s), NodeId(t), o).unwrap()
    }

    fn full_mesh(n: u16, bad: Option<u16>) -> Vec<VoteMessage> {
        let mut votes = Vec::new();
        for s in 0..n {
            for t in 0..n {
                if s != t {
                    votes.push(vote(s, t, bad == Some(s) || bad == Some(t)));
                }
            }
        }
        votes
    }

    #[test]
    fn all_match_is_clean() {
        assert_eq!(tally(3, &full_mesh(3, None)), Verdict::Clean);
        assert_eq!(tally(3, &[]), Verdict::Clean);
    }

    #[test]
    fn single_tamper_is_isolated_at_three() {
        // Nodes 0 and 1 flag 2 (2 of 3); node 2 flags 0 and 1 (1 of 3 each).
        let v = tally(3, &full_mesh(3, Some(2)));
        assert_eq!(v, Verdict::IntrusionAt([NodeId(2)].into_iter().collect()));
        assert_eq!(v.to_string(), "INTRUSION node=2");
    }

    #[test]
    fn two_nodes_cannot_form_a_majority() {
        assert_eq!(tally(2, &full_mesh(2, Some(1))), Verdict::Inconclusive);
    }

    #[test]
    fn five_nodes_isolate_tampered_replica() {
        let v = tally(5, &full_mesh(5, Some(3)));
        assert_eq!(v, Verdict::IntrusionAt([NodeId(3)].into_iter().collect()));
    }

    #[test]
    fn three_way_split_is_inconclusive() {
        let mut votes = Vec::new();
        for s in 0..3 {
            for t in 0..3 {
                if s != t {
                    votes.push(vote(s, t, true));
                }
            }
        }
        // Everyone flags everyone: each node has 2 of 3 against it, which
        // leaves no trusted majority.
        assert_eq!(tally(3, &votes), Verdict::Inconclusive);
        // With one voter silent only one mismatch per subject remains.
        let partial: Vec<VoteMessage> = votes
            .into_iter()
            .filter(|v| v.sender() != NodeId(0))
            .collect();
        assert_eq!(tally(4, &partial), Verdict::Inconclusive);
    }

    #[test]
    fn flagged_half_of_cluster_is_inconclusive() {
        // Two of four replicas diverge from the other two.
        let votes: Vec<VoteMessage> = (0..4u16)
            .flat_map(|s| {
                (0..4u16)
                    .filter(move |t| *t != s)
                    .map(move |t| vote(s, t, (s < 2) != (t < 2)))
            })
            .collect();
        assert_eq!(tally(4, &votes), Verdict::Inconclusive);
    }

    #[test]
    fn abstentions_weaken_the_quorum() {
        // Node 0 silent; only node 1 reports node 2.
        let votes = vec![vote(1, 2, true), vote(2, 1, true)];
        assert_eq!(tally(3, &votes), Verdict::Inconclusive);
    }

    #[test]
    fn duplicate_votes_count_once() {
        let votes = vec![vote(0, 2, true), vote(0, 2, true), vote(0, 2, true)];
        assert_eq!(tally(3, &votes), Verdict::Inconclusive);
        let round = ConsensusRound::conclude(3, "p".into(), BTreeMap::new(), &votes);
        assert_eq!(round.votes.len(), 1);
    }

    #[test]
    fn out_of_range_votes_are_ignored() {
        let votes = vec![vote(0, 7, true), vote(7, 1, true), vote(9, 1, true)];
        assert_eq!(tally(3, &votes), Verdict::Clean);
    }
}
