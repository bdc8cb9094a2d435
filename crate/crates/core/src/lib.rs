//! Control-flow signatures for replicated processes.
//!
//! A process is profiled by exporting its control-flow graph, peeling it into
//! edge-disjoint arborescences and hashing each one. Replicas exchange the
//! encrypted signatures, compare them and vote on which copies diverge.

pub mod arborescence;
pub mod cfg;
pub mod matcher;
pub mod replica;
pub mod signature;

pub use arborescence::{peel_edge_disjoint, Arborescence, ArborescenceSet};
pub use cfg::{parse_cfg, BlockId, CfgError, CfgFormat, ControlFlowGraph, Edge, Mutation};
pub use matcher::{match_signatures, MatchDetail, MatchVerdict, Outcome};
pub use replica::{ClusterConfig, NodeId, Verdict};
pub use signature::{build_signature, Cipher, CipherKey, HashAlgorithm, ProcessSignature};
