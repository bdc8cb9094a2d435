use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::consensus::ConsensusRound;
use super::transport::{Mailbox, Transport, TransportError};
use super::wire::{Frame, SignatureEnvelope, VoteMessage};
use super::{ClusterConfig, NodeId};
use crate::arborescence::peel_edge_disjoint;
use crate::cfg::{parse_cfg, validate_cfg, CfgError, CfgFormat, ValidationReport};
use crate::matcher::{match_signatures, Outcome};
use crate::signature::{
    build_signature, decrypt, encrypt, EncryptedSignature, ProcessSignature, SignatureError,
};

/// A CFG export handed to a replica for profiling.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CfgInput {
    pub label: String,
    pub text: String,
    pub format: CfgFormat,
}

impl CfgInput {
    pub fn new(label: impl Into<String>, text: impl Into<String>, format: CfgFormat) -> Self {
        CfgInput {
            label: label.into(),
            text: text.into(),
            format,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProfilingError {
    #[error("parse failed: {0}")]
    Parse(#[from] CfgError),
    #[error("graph failed validation: {0}")]
    Invalid(ValidationReport),
    #[error("could not seal signature: {0}")]
    Seal(#[from] SignatureError),
}

/// Wall-clock cost of each stage on one node.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeTimings {
    pub parse: Duration,
    /// Validation plus arborescence peeling.
    pub extract: Duration,
    /// Hashing plus encryption.
    pub hash: Duration,
    /// Decrypt-and-compare work over all received envelopes.
    pub matching: Duration,
    /// Number of envelopes matched.
    pub matches: usize,
    /// Vote exchange plus tally.
    pub consensus: Duration,
}

impl NodeTimings {
    pub fn profiling(&self) -> Duration {
        self.parse + self.extract + self.hash
    }
}

/// How long a collection phase may wait for messages.
#[derive(Clone, Copy, Debug)]
pub(crate) enum Wait {
    /// Take only what is already queued.
    Drain,
    Until(Instant),
}

/// One replica's state across a round.
#[derive(Debug)]
pub struct ReplicaNode {
    id: NodeId,
    config: ClusterConfig,
    label: Option<String>,
    signature: Option<ProcessSignature>,
    sealed: Option<EncryptedSignature>,
    profiling_error: Option<ProfilingError>,
    timings: NodeTimings,
    peer_digests: BTreeMap<NodeId, Vec<String>>,
    envelopes_from: BTreeSet<NodeId>,
    own_votes: Vec<VoteMessage>,
    vote_details: BTreeMap<NodeId, String>,
    peer_votes: Vec<VoteMessage>,
    buffered_votes: Vec<VoteMessage>,
    dropped_frames: usize,
}

impl ReplicaNode {
    pub fn new(id: NodeId, config: ClusterConfig) -> Self {
        ReplicaNode {
            id,
            config,
            label: None,
            signature: None,
            sealed: None,
            profiling_error: None,
            timings: NodeTimings::default(),
            peer_digests: BTreeMap::new(),
            envelopes_from: BTreeSet::new(),
            own_votes: Vec::new(),
            vote_details: BTreeMap::new(),
            peer_votes: Vec::new(),
            buffered_votes: Vec::new(),
            dropped_frames: 0,
        }
    }

    pub fn id(&self) -> NodeId {
        self.id
    }

    pub fn signature(&self) -> Option<&ProcessSignature> {
        self.signature.as_ref()
    }

    pub fn profiling_error(&self) -> Option<&ProfilingError> {
        self.profiling_error.as_ref()
    }

    pub fn timings(&self) -> &NodeTimings {
        &self.timings
    }

    /// Votes this node cast, one per peer envelope it judged.
    pub fn own_votes(&self) -> &[VoteMessage] {
        &self.own_votes
    }

    /// Match detail behind each vote, keyed by the judged node.
    pub fn vote_details(&self) -> &BTreeMap<NodeId, String> {
        &self.vote_details
    }

    /// Frames discarded as malformed, duplicated or late.
    pub fn dropped_frames(&self) -> usize {
        self.dropped_frames
    }

    /// Parse, validate, peel, hash and seal. On failure the node keeps the
    /// error and abstains from the rest of the round.
    pub fn run_profiling(&mut self, input: &CfgInput) -> Result<&ProcessSignature, ProfilingError> {
        match self.profile(input) {
            Ok(()) => Ok(self.signature.as_ref().expect("set by profile")),
            Err(e) => {
                self.profiling_error = Some(e.clone());
                Err(e)
            }
        }
    }

    fn profile(&mut self, input: &CfgInput) -> Result<(), ProfilingError> {
        self.label = Some(input.label.clone());

        let t = Instant::now();
        let parsed = parse_cfg(&input.text, input.format);
        self.timings.parse = t.elapsed();
        let mut graph = parsed?;

        let t = Instant::now();
        let report = validate_cfg(&graph);
        if !report.is_ok() {
            if self.config.prune_unreachable && report.only_unreachable() {
                graph = graph.prune_unreachable();
            } else {
                self.timings.extract = t.elapsed();
                return Err(ProfilingError::Invalid(report));
            }
        }
        let set = peel_edge_disjoint(&graph);
        self.timings.extract = t.elapsed();

        let t = Instant::now();
        let signature = build_signature(&set, self.config.algorithm, &input.label);
        let sealed = encrypt(&signature, self.config.cipher, self.config.key);
        self.timings.hash = t.elapsed();

        self.sealed = Some(sealed?);
        self.signature = Some(signature);
        Ok(())
    }

    fn peers(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.config.node_ids().filter(move |p| *p != self.id)
    }

    /// Sends this node's sealed signature to every peer. Returns the peers
    /// that could not be reached; nothing is sent before profiling succeeds.
    pub fn broadcast_signature(&self, transport: &dyn Transport) -> Vec<(NodeId, TransportError)> {
        let Some(sealed) = &self.sealed else {
            return Vec::new();
        };
        let frame = Frame::Envelope(SignatureEnvelope {
            sender: self.id,
            payload: sealed.clone(),
        })
        .encode();
        self.peers()
            .filter_map(|p| transport.send(self.id, p, &frame).err().map(|e| (p, e)))
            .collect()
    }

    /// Decrypts a peer's envelope, compares it with the local signature and
    /// records the resulting vote. Abstains (returns `None`) without a local
    /// signature, for its own envelope, or for a repeat from the same sender.
    pub fn handle_envelope(&mut self, envelope: &SignatureEnvelope) -> Option<VoteMessage> {
        let local = self.signature.as_ref()?;
        if envelope.sender == self.id
            || envelope.sender.index() >= self.config.n
            || !self.envelopes_from.insert(envelope.sender)
        {
            return None;
        }
        let t = Instant::now();
        let (outcome, detail) = match decrypt(&envelope.payload, self.config.key) {
            Ok(remote) if remote.label() != local.label() => (
                Outcome::Mismatch,
                format!("LabelDiffer({},{})", local.label(), remote.label()),
            ),
            Ok(remote) => {
                let verdict = match_signatures(local, &remote);
                self.peer_digests
                    .insert(envelope.sender, remote.digests().to_vec());
                (verdict.outcome(), verdict.detail().to_string())
            }
            Err(e) => (Outcome::Mismatch, format!("DecryptFailed({e})")),
        };
        self.timings.matching += t.elapsed();
        self.timings.matches += 1;
        let vote = VoteMessage::new(self.id, envelope.sender, outcome).expect("sender is a peer");
        self.vote_details.insert(envelope.sender, detail);
        self.own_votes.push(vote);
        Some(vote)
    }

    fn next_frame(mailbox: &Mailbox, wait: Wait) -> Option<Vec<u8>> {
        match wait {
            Wait::Drain => mailbox.try_recv(),
            Wait::Until(deadline) => mailbox.recv_until(deadline),
        }
    }

    /// Reads envelopes until one has arrived from every peer or `wait`
    /// runs out. Early votes are kept for the next phase.
    pub(crate) fn collect_envelopes(&mut self, mailbox: &Mailbox, wait: Wait) {
        let expected = self.config.n - 1;
        while self.envelopes_from.len() < expected {
            let Some(bytes) = Self::next_frame(mailbox, wait) else {
                break;
            };
            match Frame::decode(&bytes) {
                Ok(Frame::Envelope(env)) => {
                    if self.handle_envelope(&env).is_none() {
                        self.dropped_frames += 1;
                        if self.signature.is_none() {
                            // Still counts as heard from, so a failed node
                            // does not wait out the timeout.
                            self.envelopes_from.insert(env.sender);
                        }
                    }
                }
                Ok(Frame::Vote(v)) => self.buffered_votes.push(v),
                Err(_) => self.dropped_frames += 1,
            }
        }
    }

    /// Sends every vote this node cast to every peer.
    pub fn send_votes(&self, transport: &dyn Transport) -> Vec<(NodeId, TransportError)> {
        let mut failures = Vec::new();
        for vote in &self.own_votes {
            let frame = Frame::Vote(*vote).encode();
            for p in self.peers() {
                if let Err(e) = transport.send(self.id, p, &frame) {
                    failures.push((p, e));
                }
            }
        }
        failures
    }

    /// Reads peer votes until every peer has delivered `n - 1` of them or
    /// `wait` runs out. Envelopes arriving now are late and dropped.
    pub(crate) fn collect_votes(&mut self, mailbox: &Mailbox, wait: Wait) {
        self.peer_votes.append(&mut self.buffered_votes);
        let n = self.config.n;
        let expected = (n - 1) * (n - 1);
        while self.peer_votes.len() < expected {
            let Some(bytes) = Self::next_frame(mailbox, wait) else {
                break;
            };
            match Frame::decode(&bytes) {
                Ok(Frame::Vote(v)) if v.sender() != self.id => self.peer_votes.push(v),
                _ => self.dropped_frames += 1,
            }
        }
    }

    /// Tallies `votes` into this node's view of the round.
    pub fn conclude_round(&self, votes: &[VoteMessage]) -> ConsensusRound {
        let mut digests = self.peer_digests.clone();
        if let Some(sig) = &self.signature {
            digests.insert(self.id, sig.digests().to_vec());
        }
        ConsensusRound::conclude(
            self.config.n,
            self.label.clone().unwrap_or_default(),
            digests,
            votes,
        )
    }

    /// Own votes plus every vote received from peers.
    pub fn known_votes(&self) -> Vec<VoteMessage> {
        let mut all = self.own_votes.clone();
        all.extend(&self.peer_votes);
        all
    }

    pub(crate) fn add_consensus_time(&mut self, d: Duration) {
        self.timings.consensus += d;
    }
}
