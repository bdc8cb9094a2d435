//! Message delivery between replicas. Both transports hand raw frame bytes
//! to the receiving node's [`Mailbox`]; only the path in between differs.

use std::collections::{BTreeSet, HashMap};
use std::io::{self, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use thiserror::Error;

use super::wire::read_frame;
use super::NodeId;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TransportKind {
    /// Channels inside one process; deterministic.
    #[default]
    InProcess,
    /// Length-prefixed frames over loopback TCP.
    Socket,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransportError {
    #[error("peer {0} is unreachable")]
    PeerDown(NodeId),
    #[error("no such node {0}")]
    UnknownNode(NodeId),
    #[error("send to {peer} failed: {message}")]
    Io { peer: NodeId, message: String },
}

pub trait Transport: Send + Sync {
    fn send(&self, from: NodeId, to: NodeId, frame: &[u8]) -> Result<(), TransportError>;
}

/// Receiving end for one node.
#[derive(Debug)]
pub struct Mailbox {
    rx: Receiver<Vec<u8>>,
}

impl Mailbox {
    /// Next frame if one is already queued.
    pub fn try_recv(&self) -> Option<Vec<u8>> {
        self.rx.try_recv().ok()
    }

    /// Waits for the next frame until `deadline`.
    pub fn recv_until(&self, deadline: Instant) -> Option<Vec<u8>> {
        let now = Instant::now();
        if now >= deadline {
            return self.try_recv();
        }
        match self.rx.recv_timeout(deadline - now) {
            Ok(frame) => Some(frame),
            Err(RecvTimeoutError::Timeout) | Err(RecvTimeoutError::Disconnected) => None,
        }
    }
}

pub struct InProcessTransport {
    senders: Vec<Sender<Vec<u8>>>,
}

/// Channel transport for `n` nodes.
pub fn in_process(n: usize) -> (InProcessTransport, Vec<Mailbox>) {
    let (senders, mailboxes) = (0..n)
        .map(|_| {
            let (tx, rx) = mpsc::channel();
            (tx, Mailbox { rx })
        })
        .unzip();
    (InProcessTransport { senders }, mailboxes)
}

impl Transport for InProcessTransport {
    fn send(&self, _from: NodeId, to: NodeId, frame: &[u8]) -> Result<(), TransportError> {
        let tx = self
            .senders
            .get(to.index())
            .ok_or(TransportError::UnknownNode(to))?;
        // A dropped mailbox models a node that is down.
        tx.send(frame.to_vec())
            .map_err(|_| TransportError::PeerDown(to))
    }
}

/// Loopback TCP transport. Every live node listens on its own port; a
/// connection per (sender, receiver) pair is opened on first use and frames
/// are written back to back.
pub struct SocketTransport {
    addrs: Vec<SocketAddr>,
    connections: Mutex<HashMap<(NodeId, NodeId), TcpStream>>,
    stop: Arc<AtomicBool>,
    acceptors: Vec<JoinHandle<()>>,
}

/// Binds listeners for `n` nodes on 127.0.0.1. Nodes in `down` get an
/// address with nothing listening, so connecting to them fails.
pub fn socket(n: usize, down: &BTreeSet<NodeId>) -> io::Result<(SocketTransport, Vec<Mailbox>)> {
    let stop = Arc::new(AtomicBool::new(false));
    let mut addrs = Vec::with_capacity(n);
    let mut mailboxes = Vec::with_capacity(n);
    let mut acceptors = Vec::new();
    for i in 0..n {
        let (tx, rx) = mpsc::channel();
        mailboxes.push(Mailbox { rx });
        let listener = TcpListener::bind("127.0.0.1:0")?;
        addrs.push(listener.local_addr()?);
        if down.contains(&NodeId(i as u16)) {
            drop(listener);
            continue;
        }
        listener.set_nonblocking(true)?;
        let stop = Arc::clone(&stop);
        acceptors.push(thread::spawn(move || accept_loop(listener, tx, stop)));
    }
    Ok((
        SocketTransport {
            addrs,
            connections: Mutex::new(HashMap::new()),
            stop,
            acceptors,
        },
        mailboxes,
    ))
}

fn accept_loop(listener: TcpListener, tx: Sender<Vec<u8>>, stop: Arc<AtomicBool>) {
    while !stop.load(Ordering::Relaxed) {
        match listener.accept() {
            Ok((stream, _)) => {
                if stream.set_nonblocking(false).is_err() {
                    continue;
                }
                let tx = tx.clone();
                thread::spawn(move || read_loop(stream, tx));
            }
            Err(e) if e.kind() == io::ErrorKind::WouldBlock => {
                thread::sleep(Duration::from_millis(1))
            }
            Err(_) => thread::sleep(Duration::from_millis(1)),
        }
    }
}

fn read_loop(mut stream: TcpStream, tx: Sender<Vec<u8>>) {
    // Ends on EOF, on a framing error, or when the mailbox is gone.
    while let Ok(Some(frame)) = read_frame(&mut stream) {
        if tx.send(frame).is_err() {
            break;
        }
    }
}

impl SocketTransport {
    pub fn addr(&self, node: NodeId) -> Option<SocketAddr> {
        self.addrs.get(node.index()).copied()
    }
}

impl Transport for SocketTransport {
    fn send(&self, from: NodeId, to: NodeId, frame: &[u8]) -> Result<(), TransportError> {
        let addr = self.addr(to).ok_or(TransportError::UnknownNode(to))?;
        let mut conns = self.connections.lock().expect("connection table poisoned");
        if let std::collections::hash_map::Entry::Vacant(slot) = conns.entry((from, to)) {
            let stream = TcpStream::connect_timeout(&addr, Duration::from_millis(500))
                .map_err(|_| TransportError::PeerDown(to))?;
            let _ = stream.set_nodelay(true);
            slot.insert(stream);
        }
        let stream = conns.get_mut(&(from, to)).expect("inserted above");
        stream.write_all(frame).map_err(|e| TransportError::Io {
            peer: to,
            message: e.to_string(),
        })
    }
}

impl Drop for SocketTransport {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Ok(mut conns) = self.connections.lock() {
            for (_, s) in conns.drain() {
                let _ = s.shutdown(std::net::Shutdown::Both);
            }
        }
        for h in self.acceptors.drain(..) {
            let _ = h.join();
        }
    }
}

/// One attempted send, as seen by the transcript.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SendRecord {
    pub from: NodeId,
    pub to: NodeId,
    pub frame: Vec<u8>,
    pub error: Option<String>,
}

/// Wraps a transport and keeps a log of every send attempt.
pub struct RecordingTransport {
    inner: Arc<dyn Transport>,
    log: Mutex<Vec<SendRecord>>,
}

impl RecordingTransport {
    pub fn new(inner: Arc<dyn Transport>) -> Self {
        RecordingTransport {
            inner,
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn records(&self) -> Vec<SendRecord> {
        self.log.lock().expect("send log poisoned").clone()
    }
}

impl Transport for RecordingTransport {
    fn send(&self, from: NodeId, to: NodeId, frame: &[u8]) -> Result<(), TransportError> {
        let result = self.inner.send(from, to, frame);
        self.log
            .lock()
            .expect("send log poisoned")
            .push(SendRecord {
                from,
                to,
                frame: frame.to_vec(),
                error: result.as_ref().err().map(ToString::to_string),
            });
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matcher::Outcome;
    use crate::replica::wire::{Frame, VoteMessage};

    fn frames() -> Vec<Vec<u8>> {
        (0..5u16)
            .map(|i| {
                let outcome = if i % 2 == 0 {
                    Outcome::Match
                } else {
                    Outcome::Mismatch
                };
                Frame::Vote(VoteMessage::new(NodeId(0), NodeId(1 + i % 2), outcome).unwrap())
                    .encode()
            })
            .collect()
    }

    fn drain(mailbox: &Mailbox, count: usize) -> Vec<Vec<u8>> {
        let deadline = Instant::now() + Duration::from_secs(5);
        (0..count)
            .filter_map(|_| mailbox.recv_until(deadline))
            .collect()
    }

    #[test]
    fn in_process_delivers_in_order() {
        let (t, boxes) = in_process(2);
        for f in frames() {
            t.send(NodeId(0), NodeId(1), &f).unwrap();
        }
        assert_eq!(drain(&boxes[1], 5), frames());
        assert!(boxes[0].try_recv().is_none());
    }

    #[test]
    fn in_process_reports_dropped_mailbox() {
        let (t, mut boxes) = in_process(3);
        boxes.truncate(2);
        assert_eq!(
            t.send(NodeId(0), NodeId(2), b"x"),
            Err(TransportError::PeerDown(NodeId(2)))
        );
        assert_eq!(
            t.send(NodeId(0), NodeId(9), b"x"),
            Err(TransportError::UnknownNode(NodeId(9)))
        );
    }

    #[test]
    fn socket_and_in_process_deliver_identical_bytes() {
        let (chan, chan_boxes) = in_process(2);
        let (sock, sock_boxes) = socket(2, &BTreeSet::new()).unwrap();
        for f in frames() {
            chan.send(NodeId(0), NodeId(1), &f).unwrap();
            sock.send(NodeId(0), NodeId(1), &f).unwrap();
        }
        let via_chan = drain(&chan_boxes[1], 5);
        let via_sock = drain(&sock_boxes[1], 5);
        assert_eq!(via_chan, via_sock);
        assert_eq!(via_sock, frames());
    }

    #[test]
    fn socket_peer_down_only_affects_that_peer() {
        let down: BTreeSet<NodeId> = [NodeId(2)].into_iter().collect();
        let (sock, boxes) = socket(3, &down).unwrap();
        let f = &frames()[0];
        assert_eq!(
            sock.send(NodeId(0), NodeId(2), f),
            Err(TransportError::PeerDown(NodeId(2)))
        );
        sock.send(NodeId(0), NodeId(1), f).unwrap();
        assert_eq!(drain(&boxes[1], 1), vec![f.clone()]);
    }

    #[test]
    fn recording_transport_logs_failures() {
        let (t, mut boxes) = in_process(2);
        boxes.truncate(1);
        let rec = RecordingTransport::new(Arc::new(t));
        assert!(rec.send(NodeId(0), NodeId(1), b"f").is_err());
        let log = rec.records();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].error.as_deref(), Some("peer 1 is unreachable"));
    }
}
