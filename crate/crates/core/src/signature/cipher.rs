//! Demo-grade transport ciphers for signatures. None of them authenticate:
//! a wrong key or a corrupted payload only shows up when the plaintext fails
//! to parse.

use std::fmt;
use std::str::FromStr;

use super::{ProcessSignature, SignatureError};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cipher {
    /// Identity; for tests.
    Null,
    /// Adds the key to every byte, mod 256.
    #[default]
    ShiftByte,
    /// XORs with a keystream seeded from the key.
    XorStream,
}

impl Cipher {
    pub const ALL: [Cipher; 3] = [Cipher::Null, Cipher::ShiftByte, Cipher::XorStream];

    /// Tag byte used on the wire.
    pub fn tag(self) -> u8 {
        match self {
            Cipher::Null => 0,
            Cipher::ShiftByte => 1,
            Cipher::XorStream => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Cipher::Null),
            1 => Some(Cipher::ShiftByte),
            2 => Some(Cipher::XorStream),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Cipher::Null => "null",
            Cipher::ShiftByte => "shift",
            Cipher::XorStream => "xor",
        }
    }

    pub fn accepts_key(self, key: u32) -> bool {
        match self {
            Cipher::Null => true,
            Cipher::ShiftByte => (1..=255).contains(&key),
            Cipher::XorStream => key != 0,
        }
    }

    fn check_key(self, key: u32) -> Result<(), SignatureError> {
        if self.accepts_key(key) {
            Ok(())
        } else {
            Err(SignatureError::InvalidKey { cipher: self, key })
        }
    }

    /// Encrypts `bytes` in place.
    pub fn apply(self, key: u32, bytes: &mut [u8]) -> Result<(), SignatureError> {
        self.check_key(key)?;
        match self {
            Cipher::Null => {}
            Cipher::ShiftByte => {
                let k = key as u8;
                bytes.iter_mut().for_each(|b| *b = b.wrapping_add(k));
            }
            Cipher::XorStream => Keystream::new(key).xor_into(bytes),
        }
        Ok(())
    }

    /// Decrypts `bytes` in place.
    pub fn invert(self, key: u32, bytes: &mut [u8]) -> Result<(), SignatureError> {
        self.check_key(key)?;
        match self {
            Cipher::Null => {}
            Cipher::ShiftByte => {
                let k = key as u8;
                bytes.iter_mut().for_each(|b| *b = b.wrapping_sub(k));
            }
            Cipher::XorStream => Keystream::new(key).xor_into(bytes),
        }
        Ok(())
    }
}

impl fmt::Display for Cipher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Cipher {
    type Err = SignatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "null" | "none" => Ok(Cipher::Null),
            "shift" | "shiftbyte" => Ok(Cipher::ShiftByte),
            "xor" | "xorstream" => Ok(Cipher::XorStream),
            _ => Err(SignatureError::UnknownCipher(s.to_string())),
        }
    }
}

/// SplitMix64 byte stream: each 64-bit output contributes 8 bytes,
/// little-endian. The state starts at the key.
#[derive(Clone, Debug)]
pub struct Keystream {
    state: u64,
}

impl Keystream {
    pub fn new(key: u32) -> Self {
        Keystream {
            state: u64::from(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    pub fn xor_into(mut self, bytes: &mut [u8]) {
        for chunk in bytes.chunks_mut(8) {
            let block = self.next_u64().to_le_bytes();
            chunk.iter_mut().zip(block).for_each(|(b, k)| *b ^= k);
        }
    }
}

/// Secret plus the small id that travels next to the ciphertext.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CipherKey {
    pub id: u8,
    pub secret: u32,
}

impl CipherKey {
    pub fn new(secret: u32) -> Self {
        CipherKey { id: 0, secret }
    }

    pub fn with_id(mut self, id: u8) -> Self {
        self.id = id;
        self
    }
}

impl From<u32> for CipherKey {
    fn from(secret: u32) -> Self {
        CipherKey::new(secret)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct EncryptedSignature {
    pub cipher: Cipher,
    pub key_id: u8,
    pub payload: Vec<u8>,
}

/// Serializes `sig` to its text form and encrypts the bytes.
pub fn encrypt(
    sig: &ProcessSignature,
    cipher: Cipher,
    key: impl Into<CipherKey>,
) -> Result<EncryptedSignature, SignatureError> {
    let key = key.into();
    let mut payload = sig.to_text().into_bytes();
    cipher.apply(key.secret, &mut payload)?;
    Ok(EncryptedSignature {
        cipher,
        key_id: key.id,
        payload,
    })
}

/// Inverts [`encrypt`] and parses the plaintext. Any wrong key or corrupted
/// payload surfaces as [`SignatureError::MalformedPlaintext`].
pub fn decrypt(
    e: &EncryptedSignature,
    key: impl Into<CipherKey>,
) -> Result<ProcessSignature, SignatureError> {
    let key = key.into();
    let mut plain = e.payload.clone();
    e.cipher.invert(key.secret, &mut plain)?;
    let text = String::from_utf8(plain)
        .map_err(|_| SignatureError::MalformedPlaintext("payload is not text".into()))?;
    ProcessSignature::from_text(&text)
        .map_err(|err| SignatureError::MalformedPlaintext(err.to_string()))
}
