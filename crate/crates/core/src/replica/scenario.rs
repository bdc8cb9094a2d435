//! Scripted cluster runs: which fixture every replica profiles, which
//! replicas are tampered with or silent, and a canonical transcript of what
//! was sent.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use super::consensus::{ConsensusRound, Verdict};
use super::node::{CfgInput, NodeTimings, ReplicaNode, Wait};
use super::transport::{
    in_process, socket, Mailbox, RecordingTransport, SendRecord, Transport, TransportKind,
};
use super::wire::Frame;
use super::{ClusterConfig, ConfigError, NodeId, Schedule};
use crate::cfg::{mutate, mutate_pruned, parse_cfg, to_dot, CfgFormat, Mutation};
use crate::signature::CipherKey;

pub const TRANSCRIPT_MAGIC: &str = "cfsig-transcript/1";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tamper {
    pub node: NodeId,
    pub mutation: Mutation,
}

/// What each replica runs. Untouched replicas profile the base input.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Scenario {
    pub fixture: String,
    pub tampers: Vec<Tamper>,
    /// Replicas that never start; their peers see them as down.
    pub silent: BTreeSet<NodeId>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("fixture {name}: {message}")]
    Fixture { name: String, message: String },
    #[error("tamper on node {node}: {message}")]
    Tamper { node: NodeId, message: String },
    #[error("transport setup failed: {0}")]
    Transport(String),
}

/// A scenario plus the cluster settings it asks for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScenarioFile {
    pub config: ClusterConfig,
    pub scenario: Scenario,
}

impl ScenarioFile {
    /// Parses `key=value` lines. `#` starts a comment. Recognized keys:
    /// `n`, `fixture`, `tamper` (repeatable, `NODE:MUTATION`), `alg`, `key`,
    /// `cipher`, `transport`, `timeout_ms`, `schedule`, `silent`
    /// (comma-separated ids) and `prune`.
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut config = ClusterConfig::new(3);
        let mut scenario = Scenario::default();
        let mut saw_n = false;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |message: String| ScenarioError::Parse { line, message };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<u64>().map_err(|e| err(format!("{key}: {e}")));
            match key {
                "n" => {
                    config.n = num(value)? as usize;
                    saw_n = true;
                }
                "fixture" => scenario.fixture = value.to_string(),
                "tamper" => {
                    let (node, m) = value
                        .split_once(':')
                        .ok_or_else(|| err("tamper expects NODE:MUTATION".into()))?;
                    let node = NodeId(
                        node.trim()
                            .parse()
                            .map_err(|e| err(format!("tamper node: {e}")))?,
                    );
                    let mutation = m.parse::<Mutation>().map_err(|e| err(e.to_string()))?;
                    scenario.tampers.push(Tamper { node, mutation });
                }
                "alg" => config.algorithm = value.parse().map_err(|e| err(format!("{e}")))?,
                "cipher" => config.cipher = value.parse().map_err(|e| err(format!("{e}")))?,
                "key" => {
                    let secret =
                        u32::try_from(num(value)?).map_err(|e| err(format!("key: {e}")))?;
                    config.key = CipherKey::new(secret).with_id(config.key.id);
                }
                "key_id" => {
                    let id = u8::try_from(num(value)?).map_err(|e| err(format!("key_id: {e}")))?;
                    config.key = config.key.with_id(id);
                }
                "transport" => {
                    config.transport = match value {
                        "inprocess" | "in-process" => TransportKind::InProcess,
                        "socket" => TransportKind::Socket,
                        _ => return Err(err(format!("unknown transport {value:?}"))),
                    }
                }
                "schedule" => {
                    config.schedule = match value {
                        "single" => Schedule::SingleThread,
                        "multi" => Schedule::MultiThread,
                        _ => return Err(err(format!("unknown schedule {value:?}"))),
                    }
                }
                "timeout_ms" => config.timeout = Duration::from_millis(num(value)?),
                "silent" => {
                    for id in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                        let id = id.parse().map_err(|e| err(format!("silent: {e}")))?;
                        scenario.silent.insert(NodeId(id));
                    }
                }
                "prune" => {
                    config.prune_unreachable =
                        value.parse().map_err(|e| err(format!("prune: {e}")))?
                }
                _ => return Err(err(format!("unknown key {key:?}"))),
            }
        }
        if !saw_n {
            return Err(ScenarioError::Parse {
                line: 0,
                message: "missing n".into(),
            });
        }
        if scenario.fixture.is_empty() {
            return Err(ScenarioError::Parse {
                line: 0,
                message: "missing fixture".into(),
            });
        }
        config.validate()?;
        Ok(ScenarioFile { config, scenario })
    }
}

/// Reads `<dir>/<name>.dot`, falling back to `<dir>/<name>.graphml`.
pub fn load_fixture(dir: &Path, name: &str) -> Result<CfgInput, ScenarioError> {
    let candidates: [(PathBuf, CfgFormat); 2] = [
        (dir.join(format!("{name}.dot")), CfgFormat::Dot),
        (dir.join(format!("{name}.graphml")), CfgFormat::GraphMl),
    ];
    for (path, format) in candidates {
        if let Ok(text) = std::fs::read_to_string(&path) {
            return Ok(CfgInput::new(name, text, format));
        }
    }
    Err(ScenarioError::Fixture {
        name: name.to_string(),
        message: format!("no {name}.dot or {name}.graphml in {}", dir.display()),
    })
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    /// The verdict all live replicas agree on, or `Inconclusive` when they
    /// disagree or none finished.
    pub verdict: Verdict,
    pub rounds: BTreeMap<NodeId, ConsensusRound>,
    pub timings: BTreeMap<NodeId, NodeTimings>,
    pub records: Vec<SendRecord>,
    /// Same for every run of the same scenario, whatever the transport or
    /// schedule.
    pub transcript: String,
    pub elapsed: Duration,
}

impl ScenarioOutcome {
    fn count(&self, kind: u8) -> usize {
        self.records
            .iter()
            .filter(|r| r.frame.get(4) == Some(&kind))
            .count()
    }

    pub fn envelope_count(&self) -> usize {
        self.count(1)
    }

    pub fn vote_count(&self) -> usize {
        self.count(2)
    }

    pub fn failures(&self) -> impl Iterator<Item = &SendRecord> {
        self.records.iter().filter(|r| r.error.is_some())
    }
}

fn tampered_input(
    config: &ClusterConfig,
    base: &CfgInput,
    tamper: &Tamper,
) -> Result<CfgInput, ScenarioError> {
    let err = |message: String| ScenarioError::Tamper {
        node: tamper.node,
        message,
    };
    let graph = parse_cfg(&base.text, base.format).map_err(|e| err(e.to_string()))?;
    let mutated = if config.prune_unreachable {
        mutate_pruned(&graph, &tamper.mutation)
    } else {
        mutate(&graph, &tamper.mutation)
    }
    .map_err(|e| err(e.to_string()))?;
    Ok(CfgInput::new(
        base.label.clone(),
        to_dot(&mutated),
        CfgFormat::Dot,
    ))
}

/// A shared transport plus one mailbox per node; silent nodes get none.
type Wiring = (Arc<dyn Transport>, Vec<Option<Mailbox>>);

fn build_transport(
    config: &ClusterConfig,
    silent: &BTreeSet<NodeId>,
) -> Result<Wiring, ScenarioError> {
    let (transport, mailboxes): (Arc<dyn Transport>, Vec<Mailbox>) = match config.transport {
        TransportKind::InProcess => {
            let (t, m) = in_process(config.n);
            (Arc::new(t), m)
        }
        TransportKind::Socket => {
            let (t, m) =
                socket(config.n, silent).map_err(|e| ScenarioError::Transport(e.to_string()))?;
            (Arc::new(t), m)
        }
    };
    // Dropping a silent node's mailbox makes sends to it fail.
    let mailboxes = mailboxes
        .into_iter()
        .enumerate()
        .map(|(i, m)| (!silent.contains(&NodeId(i as u16))).then_some(m))
        .collect();
    Ok((transport, mailboxes))
}

/// Runs one full round and returns every node's view of it.
pub fn run_cluster_scenario(
    config: &ClusterConfig,
    scenario: &Scenario,
    base: &CfgInput,
) -> Result<ScenarioOutcome, ScenarioError> {
    config.validate()?;
    let mut inputs: Vec<CfgInput> = vec![base.clone(); config.n];
    for t in &scenario.tampers {
        if t.node.index() >= config.n {
            return Err(ScenarioError::Tamper {
                node: t.node,
                message: format!("cluster has only {} nodes", config.n),
            });
        }
        inputs[t.node.index()] = tampered_input(config, base, t)?;
    }

    let start = Instant::now();
    let (inner, mailboxes) = build_transport(config, &scenario.silent)?;
    let recorder = Arc::new(RecordingTransport::new(inner));
    let live: Vec<(ReplicaNode, Mailbox, CfgInput)> = config
        .node_ids()
        .zip(mailboxes)
        .zip(inputs)
        .filter_map(|((id, m), input)| m.map(|m| (ReplicaNode::new(id, config.clone()), m, input)))
        .collect();

    let finished: Vec<(ReplicaNode, ConsensusRound)> = match config.schedule {
        Schedule::SingleThread => run_interleaved(config, live, recorder.as_ref()),
        Schedule::MultiThread => run_threaded(config, live, &recorder),
    };
    let elapsed = start.elapsed();

    let mut rounds = BTreeMap::new();
    let mut timings = BTreeMap::new();
    for (node, round) in &finished {
        rounds.insert(node.id(), round.clone());
        timings.insert(node.id(), *node.timings());
    }
    let mut verdicts = rounds.values().map(|r| r.verdict.clone());
    let verdict = match verdicts.next() {
        Some(first) if verdicts.all(|v| v == first) => first,
        _ => Verdict::Inconclusive,
    };
    let mut records = recorder.records();
    records.sort_by(|a, b| {
        (a.frame.get(4), a.from, a.to, &a.frame).cmp(&(b.frame.get(4), b.from, b.to, &b.frame))
    });
    let transcript = render_transcript(config, scenario, &finished, &records, &verdict);
    Ok(ScenarioOutcome {
        verdict,
        rounds,
        timings,
        records,
        transcript,
        elapsed,
    })
}

fn phase_wait(config: &ClusterConfig) -> Wait {
    match config.transport {
        // Channel sends complete before the next phase starts.
        TransportKind::InProcess => Wait::Drain,
        TransportKind::Socket => Wait::Until(Instant::now() + config.timeout),
    }
}

fn run_interleaved(
    config: &ClusterConfig,
    mut live: Vec<(ReplicaNode, Mailbox, CfgInput)>,
    transport: &dyn Transport,
) -> Vec<(ReplicaNode, ConsensusRound)> {
    for (node, _, input) in live.iter_mut() {
        let _ = node.run_profiling(input);
    }
    for (node, _, _) in &live {
        node.broadcast_signature(transport);
    }
    let wait = phase_wait(config);
    for (node, mailbox, _) in live.iter_mut() {
        node.collect_envelopes(mailbox, wait);
    }
    let mut started = Vec::with_capacity(live.len());
    for (node, _, _) in &live {
        let t = Instant::now();
        node.send_votes(transport);
        started.push(t.elapsed());
    }
    let wait = phase_wait(config);
    live.into_iter()
        .zip(started)
        .map(|((mut node, mailbox, _), send_time)| {
            let t = Instant::now();
            node.collect_votes(&mailbox, wait);
            let round = node.conclude_round(&node.known_votes());
            node.add_consensus_time(send_time + t.elapsed());
            (node, round)
        })
        .collect()
}

fn run_threaded(
    config: &ClusterConfig,
    live: Vec<(ReplicaNode, Mailbox, CfgInput)>,
    transport: &Arc<RecordingTransport>,
) -> Vec<(ReplicaNode, ConsensusRound)> {
    thread::scope(|s| {
        let handles: Vec<_> = live
            .into_iter()
            .map(|(mut node, mailbox, input)| {
                let transport = Arc::clone(transport);
                let timeout = config.timeout;
                s.spawn(move || {
                    let _ = node.run_profiling(&input);
                    node.broadcast_signature(transport.as_ref());
                    node.collect_envelopes(&mailbox, Wait::Until(Instant::now() + timeout));
                    let t = Instant::now();
                    node.send_votes(transport.as_ref());
                    node.collect_votes(&mailbox, Wait::Until(Instant::now() + timeout));
                    let round = node.conclude_round(&node.known_votes());
                    node.add_consensus_time(t.elapsed());
                    (node, round)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replica thread panicked"))
            .collect()
    })
}

fn render_transcript(
    config: &ClusterConfig,
    scenario: &Scenario,
    finished: &[(ReplicaNode, ConsensusRound)],
    records: &[SendRecord],
    verdict: &Verdict,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{TRANSCRIPT_MAGIC}");
    let _ = writeln!(
        out,
        "config n={} alg={} cipher={} key_id={} fixture={}",
        config.n,
        config.algorithm,
        config.cipher.name(),
        config.key.id,
        scenario.fixture
    );
    for t in &scenario.tampers {
        let _ = writeln!(out, "tamper node={} {}", t.node, t.mutation);
    }
    for id in &scenario.silent {
        let _ = writeln!(out, "silent node={id}");
    }
    for (node, _) in finished {
        match (node.signature(), node.profiling_error()) {
            (Some(sig), _) => {
                let _ = writeln!(
                    out,
                    "profile node={} digests={}",
                    node.id(),
                    sig.digests().join(",")
                );
            }
            (None, Some(e)) => {
                let _ = writeln!(out, "profile node={} error={e}", node.id());
            }
            (None, None) => {
                let _ = writeln!(out, "profile node={} error=not run", node.id());
            }
        }
    }
    for r in records {
        let kind = match Frame::decode(&r.frame) {
            Ok(Frame::Envelope(_)) => "envelope",
            Ok(Frame::Vote(_)) => "vote",
            Err(_) => "invalid",
        };
        let _ = write!(
            out,
            "send {kind} from={} to={} bytes={}",
            r.from,
            r.to,
            hex::encode(&r.frame)
        );
        if let Some(e) = &r.error {
            let _ = write!(out, " error={e}");
        }
        out.push('\n');
    }
    for (node, round) in finished {
        for (subject, detail) in node.vote_details() {
            let _ = writeln!(out, "judge node={} subject={subject} {detail}", node.id());
        }
        let _ = writeln!(out, "verdict node={} {}", node.id(), round.verdict);
    }
    let _ = writeln!(out, "verdict cluster {verdict}");
    out
}
