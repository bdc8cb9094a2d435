//! Frame codec shared by every transport.
//!
//! ```text
//! magic "CFS1" | type u8 | sender u16 BE | subject u16 BE | len u32 BE | payload
//! ```
//!
//! Type 1 carries a signature envelope (cipher tag, key id, ciphertext),
//! type 2 a vote (one byte: 0 match, 1 mismatch). Envelopes have no subject
//! and use `0xFFFF`.

use std::io::{self, Read};

use thiserror::Error;

use super::NodeId;
use crate::matcher::Outcome;
use crate::signature::{Cipher, EncryptedSignature};

pub const FRAME_MAGIC: [u8; 4] = *b"CFS1";
pub const HEADER_LEN: usize = 13;
pub const NO_SUBJECT: u16 = 0xFFFF;
/// Frames claiming a larger payload are rejected before allocation.
pub const MAX_PAYLOAD: u32 = 16 * 1024 * 1024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MessageType {
    SignatureEnvelope = 1,
    Vote = 2,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WireError {
    #[error("bad frame magic {0:02x?}")]
    BadMagic([u8; 4]),
    #[error("unknown message type {0}")]
    UnknownType(u8),
    #[error("frame truncated: need {needed} bytes, have {have}")]
    Truncated { needed: usize, have: usize },
    #[error("frame has {0} trailing bytes")]
    TrailingBytes(usize),
    #[error("payload length {0} exceeds limit")]
    TooLarge(u32),
    #[error("bad payload: {0}")]
    BadPayload(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<io::Error> for WireError {
    fn from(e: io::Error) -> Self {
        WireError::Io(e.to_string())
    }
}

/// An encrypted signature addressed from one replica to its peers. The
/// process label travels inside the ciphertext.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SignatureEnvelope {
    pub sender: NodeId,
    pub payload: EncryptedSignature,
}

/// One replica's verdict on another replica's signature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VoteMessage {
    sender: NodeId,
    subject: NodeId,
    mismatch: bool,
}

impl VoteMessage {
    /// `None` when a node would vote on itself.
    pub fn new(sender: NodeId, subject: NodeId, outcome: Outcome) -> Option<Self> {
        (sender != subject).then_some(VoteMessage {
            sender,
            subject,
            mismatch: outcome == Outcome::Mismatch,
        })
    }

    pub fn sender(&self) -> NodeId {
        self.sender
    }

    pub fn subject(&self) -> NodeId {
        self.subject
    }

    pub fn outcome(&self) -> Outcome {
        if self.mismatch {
            Outcome::Mismatch
        } else {
            Outcome::Match
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Frame {
    Envelope(SignatureEnvelope),
    Vote(VoteMessage),
}

impl Frame {
    pub fn message_type(&self) -> MessageType {
        match self {
            Frame::Envelope(_) => MessageType::SignatureEnvelope,
            Frame::Vote(_) => MessageType::Vote,
        }
    }

    pub fn sender(&self) -> NodeId {
        match self {
            Frame::Envelope(e) => e.sender,
            Frame::Vote(v) => v.sender,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let (subject, payload) = match self {
            Frame::Envelope(e) => {
                let mut p = Vec::with_capacity(2 + e.payload.payload.len());
                p.push(e.payload.cipher.tag());
                p.push(e.payload.key_id);
                p.extend_from_slice(&e.payload.payload);
                (NO_SUBJECT, p)
            }
            Frame::Vote(v) => (v.subject.0, vec![u8::from(v.mismatch)]),
        };
        let mut out = Vec::with_capacity(HEADER_LEN + payload.len());
        out.extend_from_slice(&FRAME_MAGIC);
        out.push(self.message_type() as u8);
        out.extend_from_slice(&self.sender().0.to_be_bytes());
        out.extend_from_slice(&subject.to_be_bytes());
        out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }

    /// Decodes exactly one frame; the slice must hold nothing else.
    pub fn decode(bytes: &[u8]) -> Result<Frame, WireError> {
        let header = parse_header(bytes)?;
        let total = HEADER_LEN + header.len as usize;
        if bytes.len() < total {
            return Err(WireError::Truncated {
                needed: total,
                have: bytes.len(),
            });
        }
        if bytes.len() > total {
            return Err(WireError::TrailingBytes(bytes.len() - total));
        }
        let payload = &bytes[HEADER_LEN..];
        let sender = NodeId(header.sender);
        if header.sender == NO_SUBJECT {
            return Err(WireError::BadPayload("sender id 0xFFFF is reserved".into()));
        }
        match header.kind {
            MessageType::SignatureEnvelope => {
                if header.subject != NO_SUBJECT {
                    return Err(WireError::BadPayload(
                        "envelope must not name a subject".into(),
                    ));
                }
                let [tag, key_id, rest @ ..] = payload else {
                    return Err(WireError::BadPayload(
                        "envelope payload shorter than 2 bytes".into(),
                    ));
                };
                let cipher = Cipher::from_tag(*tag)
                    .ok_or_else(|| WireError::BadPayload(format!("unknown cipher tag {tag}")))?;
                Ok(Frame::Envelope(SignatureEnvelope {
                    sender,
                    payload: EncryptedSignature {
                        cipher,
                        key_id: *key_id,
                        payload: rest.to_vec(),
                    },
                }))
            }
            MessageType::Vote => {
                let outcome = match payload {
                    [0] => Outcome::Match,
                    [1] => Outcome::Mismatch,
                    _ => {
                        return Err(WireError::BadPayload(
                            "vote payload must be a single 0 or 1 byte".into(),
                        ))
                    }
                };
                if header.subject == NO_SUBJECT {
                    return Err(WireError::BadPayload("vote must name a subject".into()));
                }
                VoteMessage::new(sender, NodeId(header.subject), outcome)
                    .map(Frame::Vote)
                    .ok_or_else(|| WireError::BadPayload("vote about the sender itself".into()))
            }
        }
    }
}

struct Header {
    kind: MessageType,
    sender: u16,
    subject: u16,
    len: u32,
}

fn parse_header(bytes: &[u8]) -> Result<Header, WireError> {
    if bytes.len() < HEADER_LEN {
        return Err(WireError::Truncated {
            needed: HEADER_LEN,
            have: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4 bytes");
    if magic != FRAME_MAGIC {
        return Err(WireError::BadMagic(magic));
    }
    let kind = match bytes[4] {
        1 => MessageType::SignatureEnvelope,
        2 => MessageType::Vote,
        t => return Err(WireError::UnknownType(t)),
    };
    let len = u32::from_be_bytes(bytes[9..13].try_into().expect("4 bytes"));
    if len > MAX_PAYLOAD {
        return Err(WireError::TooLarge(len));
    }
    Ok(Header {
        kind,
        sender: u16::from_be_bytes([bytes[5], bytes[6]]),
        subject: u16::from_be_bytes([bytes[7], bytes[8]]),
        len,
    })
}

/// Reads one raw frame from a byte stream. Returns `Ok(None)` on a clean end
/// of stream between frames.
pub fn read_frame<R: Read>(reader: &mut R) -> Result<Option<Vec<u8>>, WireError> {
    let mut header = [0u8; HEADER_LEN];
    let mut filled = 0;
    while filled < HEADER_LEN {
        match reader.read(&mut header[filled..]) {
            Ok(0) if filled == 0 => return Ok(None),
            Ok(0) => {
                return Err(WireError::Truncated {
                    needed: HEADER_LEN,
                    have: filled,
                })
            }
            Ok(k) => filled += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let parsed = parse_header(&header)?;
    let mut frame = header.to_vec();
    frame.resize(HEADER_LEN + parsed.len as usize, 0);
    reader.read_exact(&mut frame[HEADER_LEN..]).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            WireError::Truncated {
                needed: HEADER_LEN + parsed.len as usize,
                have: HEADER_LEN,
            }
        } else {
            e.into()
        }
    })?;
    Ok(Some(frame))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn envelope() -> Frame {
        Frame::Envelope(SignatureEnvelope {
            sender: NodeId(2),
            payload: EncryptedSignature {
                cipher: Cipher::ShiftByte,
                key_id: 9,
                payload: b"abc".to_vec(),
            },
        })
    }

    #[test]
    fn envelope_bytes_are_exact() {
        let bytes = envelope().encode();
        assert_eq!(
            bytes,
            [
                0x43, 0x46, 0x53, 0x31, // CFS1
                0x01, // envelope
                0x00, 0x02, // sender
                0xFF, 0xFF, // no subject
                0x00, 0x00, 0x00, 0x05, // length
                0x01, 0x09, b'a', b'b', b'c',
            ]
        );
        assert_eq!(Frame::decode(&bytes).unwrap(), envelope());
    }

    #[test]
    fn vote_bytes_are_exact() {
        let vote =
            Frame::Vote(VoteMessage::new(NodeId(0), NodeId(258), Outcome::Mismatch).unwrap());
        let bytes = vote.encode();
        assert_eq!(
            bytes,
            [0x43, 0x46, 0x53, 0x31, 0x02, 0x00, 0x00, 0x01, 0x02, 0x00, 0x00, 0x00, 0x01, 0x01]
        );
        assert_eq!(Frame::decode(&bytes).unwrap(), vote);
    }

    #[test]
    fn self_votes_cannot_be_built_or_decoded() {
        assert!(VoteMessage::new(NodeId(1), NodeId(1), Outcome::Match).is_none());
        let bytes = [0x43, 0x46, 0x53, 0x31, 2, 0, 1, 0, 1, 0, 0, 0, 1, 0];
        assert!(matches!(
            Frame::decode(&bytes),
            Err(WireError::BadPayload(_))
        ));
    }

    #[test]
    fn malformed_frames_are_rejected() {
        let good = envelope().encode();
        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            Frame::decode(&bad_magic),
            Err(WireError::BadMagic(_))
        ));
        let mut bad_type = good.clone();
        bad_type[4] = 7;
        assert_eq!(Frame::decode(&bad_type), Err(WireError::UnknownType(7)));
        assert!(matches!(
            Frame::decode(&good[..good.len() - 1]),
            Err(WireError::Truncated { .. })
        ));
        let mut long = good.clone();
        long.push(0);
        assert_eq!(Frame::decode(&long), Err(WireError::TrailingBytes(1)));
        let mut huge = good.clone();
        huge[9..13].copy_from_slice(&u32::MAX.to_be_bytes());
        assert!(matches!(Frame::decode(&huge), Err(WireError::TooLarge(_))));
        let mut bad_cipher = good;
        bad_cipher[13] = 42;
        assert!(matches!(
            Frame::decode(&bad_cipher),
            Err(WireError::BadPayload(_))
        ));
    }

    #[test]
    fn stream_reader_splits_concatenated_frames() {
        let a = envelope().encode();
        let b =
            Frame::Vote(VoteMessage::new(NodeId(1), NodeId(2), Outcome::Match).unwrap()).encode();
        let mut stream: Vec<u8> = a.iter().chain(&b).copied().collect();
        let mut cursor = io::Cursor::new(stream.clone());
        assert_eq!(read_frame(&mut cursor).unwrap().unwrap(), a);
        assert_eq!(read_frame(&mut cursor).unwrap().unwrap(), b);
        assert_eq!(read_frame(&mut cursor).unwrap(), None);

        stream.truncate(stream.len() - 1);
        let mut cursor = io::Cursor::new(stream);
        read_frame(&mut cursor).unwrap();
        assert!(matches!(
            read_frame(&mut cursor),
            Err(WireError::Truncated { .. })
        ));
    }

    proptest! {
        #[test]
        fn frames_survive_encoding(
            sender in 0u16..0xFFFF,
            subject in 0u16..0xFFFF,
            tag in 0u8..3,
            key_id in any::<u8>(),
            body in proptest::collection::vec(any::<u8>(), 0..256),
            mismatch in any::<bool>(),
        ) {
            let env = Frame::Envelope(SignatureEnvelope {
                sender: NodeId(sender),
                payload: EncryptedSignature { cipher: Cipher::from_tag(tag).unwrap(), key_id, payload: body },
            });
            prop_assert_eq!(Frame::decode(&env.encode()).unwrap(), env);
            let outcome = if mismatch { Outcome::Mismatch } else { Outcome::Match };
            if let Some(v) = VoteMessage::new(NodeId(sender), NodeId(subject), outcome) {
                let vote = Frame::Vote(v);
                prop_assert_eq!(Frame::decode(&vote.encode()).unwrap(), vote);
            }
        }
    }
}
