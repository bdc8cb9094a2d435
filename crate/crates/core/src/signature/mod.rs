//! Process signatures: canonical strings of peeled arborescences, hashed to
//! a sorted digest set, plus the text file format and the transport ciphers.

mod canonical;
mod cipher;
mod format;

use std::fmt;
use std::str::FromStr;

use md5::Md5;
use sha1::Sha1;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::arborescence::ArborescenceSet;

pub use canonical::{canonicalize, CanonicalString};
pub use cipher::{decrypt, encrypt, Cipher, CipherKey, EncryptedSignature, Keystream};
pub use format::SIGNATURE_MAGIC;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SignatureError {
    #[error("malformed signature file at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid signature: {0}")]
    Invalid(String),
    #[error("invalid key {key} for cipher {cipher}")]
    InvalidKey { cipher: Cipher, key: u32 },
    #[error("decrypted payload is not a valid signature: {0}")]
    MalformedPlaintext(String),
    #[error("unknown hash algorithm {0:?}")]
    UnknownAlgorithm(String),
    #[error("unknown cipher {0:?}")]
    UnknownCipher(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HashAlgorithm {
    #[default]
    Md5,
    Sha1,
    Sha256,
}

impl HashAlgorithm {
    pub const ALL: [HashAlgorithm; 3] = [
        HashAlgorithm::Md5,
        HashAlgorithm::Sha1,
        HashAlgorithm::Sha256,
    ];

    /// Length of a lowercase hex digest.
    pub fn hex_len(self) -> usize {
        match self {
            HashAlgorithm::Md5 => 32,
            HashAlgorithm::Sha1 => 40,
            HashAlgorithm::Sha256 => 64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HashAlgorithm::Md5 => "MD5",
            HashAlgorithm::Sha1 => "SHA1",
            HashAlgorithm::Sha256 => "SHA256",
        }
    }
}

impl fmt::Display for HashAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HashAlgorithm {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().replace('-', "").as_str() {
            "MD5" => Ok(HashAlgorithm::Md5),
            "SHA1" => Ok(HashAlgorithm::Sha1),
            "SHA256" => Ok(HashAlgorithm::Sha256),
            _ => Err(SignatureError::UnknownAlgorithm(s.to_string())),
        }
    }
}

/// Lowercase hex digest of the canonical string's ASCII bytes.
pub fn hash_canonical(c: &CanonicalString, algorithm: HashAlgorithm) -> String {
    hash_bytes(c.as_bytes(), algorithm)
}

pub(crate) fn hash_bytes(bytes: &[u8], algorithm: HashAlgorithm) -> String {
    match algorithm {
        HashAlgorithm::Md5 => hex::encode(Md5::digest(bytes)),
        HashAlgorithm::Sha1 => hex::encode(Sha1::digest(bytes)),
        HashAlgorithm::Sha256 => hex::encode(Sha256::digest(bytes)),
    }
}

/// Sorted, duplicate-free set of arborescence digests identifying a
/// program's control-flow structure.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ProcessSignature {
    algorithm: HashAlgorithm,
    digests: Vec<String>,
    label: String,
}

fn label_is_valid(label: &str) -> bool {
    label.bytes().all(|b| (0x20..0x7f).contains(&b))
}

impl ProcessSignature {
    /// Validates digests and label. Digests are sorted and deduplicated.
    pub fn new(
        algorithm: HashAlgorithm,
        mut digests: Vec<String>,
        label: impl Into<String>,
    ) -> Result<Self, SignatureError> {
        let label = label.into();
        if !label_is_valid(&label) {
            return Err(SignatureError::Invalid(format!(
                "label {label:?} must be printable ASCII"
            )));
        }
        if digests.is_empty() {
            return Err(SignatureError::Invalid("signature has no digests".into()));
        }
        for d in &digests {
            let well_formed = d.len() == algorithm.hex_len()
                && d.bytes()
                    .all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b));
            if !well_formed {
                return Err(SignatureError::Invalid(format!(
                    "digest {d:?} is not a lowercase {algorithm} hex digest"
                )));
            }
        }
        digests.sort();
        digests.dedup();
        Ok(ProcessSignature {
            algorithm,
            digests,
            label,
        })
    }

    pub fn algorithm(&self) -> HashAlgorithm {
        self.algorithm
    }

    pub fn digests(&self) -> &[String] {
        &self.digests
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.digests.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digests.is_empty()
    }
}

/// Replaces characters the signature file cannot carry.
pub fn sanitize_label(label: &str) -> String {
    label
        .chars()
        .map(|c| if (' '..='~').contains(&c) { c } else { '_' })
        .collect()
}

/// Hashes every member of `set` into a signature.
pub fn build_signature(
    set: &ArborescenceSet,
    algorithm: HashAlgorithm,
    label: &str,
) -> ProcessSignature {
    let digests = set
        .iter()
        .map(|a| hash_canonical(&canonicalize(a), algorithm))
        .collect();
    ProcessSignature::new(algorithm, digests, sanitize_label(label))
        .expect("peeled sets are non-empty and digests are well formed")
}
