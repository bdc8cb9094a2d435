//! Cluster behaviour over the fixture corpus.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use cfsig_core::arborescence::peel_edge_disjoint;
use cfsig_core::cfg::{parse_cfg, Edge, Mutation};
use cfsig_core::replica::{
    load_fixture, run_cluster_scenario, CfgInput, ClusterConfig, NodeId, Scenario, Schedule,
    Tamper, TransportKind, Verdict,
};
use cfsig_core::signature::Cipher;

fn corpus_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/corpus")
}

fn input(name: &str) -> CfgInput {
    load_fixture(&corpus_dir(), name).unwrap()
}

fn scenario(name: &str, tampers: Vec<Tamper>) -> Scenario {
    Scenario {
        fixture: name.into(),
        tampers,
        silent: BTreeSet::new(),
    }
}

#[test]
fn message_counts_follow_cluster_size() {
    for n in [2usize, 3, 5] {
        let out = run_cluster_scenario(
            &ClusterConfig::new(n),
            &scenario("wordcount", vec![]),
            &input("wordcount"),
        )
        .unwrap();
        assert_eq!(out.envelope_count(), n * (n - 1));
        assert_eq!(out.vote_count(), n * (n - 1) * (n - 1));
        assert_eq!(out.verdict, Verdict::Clean);
        assert_eq!(out.rounds.len(), n);
    }
}

/// First edge of the first peeled tree: changing it always changes the
/// signature.
fn tree_edge(name: &str) -> Edge {
    let inp = input(name);
    let g = parse_cfg(&inp.text, inp.format).unwrap();
    peel_edge_disjoint(&g).items()[0]
        .edges()
        .iter()
        .next()
        .unwrap()
        .clone()
}

#[test]
fn tamper_is_located_for_every_cluster_size_above_two() {
    let name = "qmc";
    let edge = tree_edge(name);
    let inp = input(name);
    let g = parse_cfg(&inp.text, inp.format).unwrap();
    // Removing a tree edge can strand a block; swap its endpoints then.
    let mutation = if cfsig_core::cfg::mutate(&g, &Mutation::RemoveEdge(edge.clone())).is_ok() {
        Mutation::RemoveEdge(edge)
    } else {
        Mutation::SwapNodeIds(edge.src, edge.dst)
    };
    for n in [3usize, 4, 5, 7] {
        let tampered = NodeId((n - 1) as u16);
        let s = scenario(
            name,
            vec![Tamper {
                node: tampered,
                mutation: mutation.clone(),
            }],
        );
        let out = run_cluster_scenario(&ClusterConfig::new(n), &s, &inp).unwrap();
        assert_eq!(
            out.verdict,
            Verdict::IntrusionAt([tampered].into_iter().collect()),
            "n={n}"
        );
    }
}

#[test]
fn runs_are_deterministic_across_schedules_transports_and_ciphers() {
    for cipher in Cipher::ALL {
        let mut cfg = ClusterConfig::new(3);
        cfg.cipher = cipher;
        cfg.key = if cipher == Cipher::ShiftByte {
            200.into()
        } else {
            123_456.into()
        };
        let s = scenario("teragen", vec![]);
        let baseline = run_cluster_scenario(&cfg, &s, &input("teragen")).unwrap();
        for (transport, schedule) in [
            (TransportKind::InProcess, Schedule::SingleThread),
            (TransportKind::InProcess, Schedule::MultiThread),
            (TransportKind::Socket, Schedule::SingleThread),
            (TransportKind::Socket, Schedule::MultiThread),
        ] {
            cfg.transport = transport;
            cfg.schedule = schedule;
            let out = run_cluster_scenario(&cfg, &s, &input("teragen")).unwrap();
            assert_eq!(
                out.transcript, baseline.transcript,
                "{cipher} {transport:?} {schedule:?}"
            );
        }
    }
}

#[test]
fn silent_replica_does_not_block_the_round() {
    for transport in [TransportKind::InProcess, TransportKind::Socket] {
        let mut cfg = ClusterConfig::new(5);
        cfg.timeout = Duration::from_millis(150);
        cfg.schedule = Schedule::MultiThread;
        cfg.transport = transport;
        let mut s = scenario("bbp", vec![]);
        s.silent.insert(NodeId(3));
        let out = run_cluster_scenario(&cfg, &s, &input("bbp")).unwrap();
        // Two phase timeouts at most, plus generous slack for slow hosts.
        assert!(
            out.elapsed < Duration::from_secs(3),
            "{transport:?} took {:?}",
            out.elapsed
        );
        assert_eq!(out.rounds.len(), 4);
        assert!(out.failures().count() > 0);
        assert_eq!(out.verdict, Verdict::Clean);
    }
}

#[test]
fn inapplicable_tamper_is_a_scenario_error() {
    let cfg = ClusterConfig::new(3);
    let good = input("wordcount");
    let bad = Tamper {
        node: NodeId(1),
        mutation: "remove-node:NOPE".parse().unwrap(),
    };
    assert!(run_cluster_scenario(&cfg, &scenario("wordcount", vec![bad]), &good).is_err());
}
