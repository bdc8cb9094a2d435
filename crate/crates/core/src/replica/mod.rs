//! Replica-cluster simulation: every node profiles its copy of a process,
//! sends the encrypted signature to each peer, votes on the signatures it
//! receives, and tallies the votes into a verdict.
//!
//! Rounds are synchronous: profile, exchange envelopes, exchange votes,
//! conclude. Each exchange waits until every expected message has arrived
//! or the per-phase timeout elapses; anything arriving after its phase is
//! dropped.

mod consensus;
mod node;
mod scenario;
mod transport;
mod wire;

use std::fmt;
use std::time::Duration;

use thiserror::Error;

use crate::signature::{Cipher, CipherKey, HashAlgorithm};

pub use consensus::{tally, ConsensusRound, Verdict};
pub use node::{CfgInput, NodeTimings, ProfilingError, ReplicaNode};
pub use scenario::{
    load_fixture, run_cluster_scenario, Scenario, ScenarioError, ScenarioFile, ScenarioOutcome,
    Tamper, TRANSCRIPT_MAGIC,
};
pub use transport::{
    in_process, socket, InProcessTransport, Mailbox, RecordingTransport, SendRecord,
    SocketTransport, Transport, TransportError, TransportKind,
};
pub use wire::{
    read_frame, Frame, MessageType, SignatureEnvelope, VoteMessage, WireError, FRAME_MAGIC,
    HEADER_LEN, MAX_PAYLOAD, NO_SUBJECT,
};

/// Index of a replica in the cluster. Node 0 conventionally hosts the
/// primary copy. `0xFFFF` is reserved on the wire.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub const MAX_NODES: usize = NO_SUBJECT as usize;

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// How node work is scheduled. Both produce the same transcript.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schedule {
    /// All nodes interleaved on the calling thread, phase by phase.
    #[default]
    SingleThread,
    /// One thread per node, synchronized only by messages and deadlines.
    MultiThread,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ConfigError {
    #[error("replication factor must be between 2 and {max}, got {n}")]
    ReplicationFactor { n: usize, max: usize },
    #[error("phase timeout must be positive")]
    Timeout,
    #[error("key {key} is not valid for cipher {cipher}")]
    Key { cipher: Cipher, key: u32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterConfig {
    pub n: usize,
    pub algorithm: HashAlgorithm,
    pub cipher: Cipher,
    pub key: CipherKey,
    pub transport: TransportKind,
    /// Per-phase wait budget.
    pub timeout: Duration,
    pub schedule: Schedule,
    /// Drop unreachable blocks before signing instead of failing.
    pub prune_unreachable: bool,
}

impl ClusterConfig {
    pub fn new(n: usize) -> Self {
        ClusterConfig {
            n,
            algorithm: HashAlgorithm::Md5,
            cipher: Cipher::ShiftByte,
            key: CipherKey::new(7),
            transport: TransportKind::InProcess,
            timeout: Duration::from_millis(2000),
            schedule: Schedule::SingleThread,
            prune_unreachable: false,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n < 2 || self.n > NodeId::MAX_NODES {
            return Err(ConfigError::ReplicationFactor {
                n: self.n,
                max: NodeId::MAX_NODES,
            });
        }
        if self.timeout.is_zero() {
            return Err(ConfigError::Timeout);
        }
        if !self.cipher.accepts_key(self.key.secret) {
            return Err(ConfigError::Key {
                cipher: self.cipher,
                key: self.key.secret,
            });
        }
        Ok(())
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.n as u16).map(NodeId)
    }
}
