//! Line-based text format of a signature:
//!
//! ```text
//! cfsig/1
//! alg:MD5
//! label:wordmean
//! count:2
//! <digest>
//! <digest>
//! ```
//!
//! ASCII, `\n` after every line, digests ascending.

use std::fmt::Write as _;
use std::str::FromStr;

use super::{HashAlgorithm, ProcessSignature, SignatureError};

pub const SIGNATURE_MAGIC: &str = "cfsig/1";

impl ProcessSignature {
    pub fn to_text(&self) -> String {
        let mut out =
            String::with_capacity(48 + self.digests.len() * (self.algorithm.hex_len() + 1));
        let _ = writeln!(out, "{SIGNATURE_MAGIC}");
        let _ = writeln!(out, "alg:{}", self.algorithm);
        let _ = writeln!(out, "label:{}", self.label);
        let _ = writeln!(out, "count:{}", self.digests.len());
        for d in &self.digests {
            out.push_str(d);
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, SignatureError> {
        let err = |line: usize, message: String| SignatureError::Format { line, message };
        if !text.is_ascii() {
            return Err(err(0, "signature file must be ASCII".into()));
        }
        let Some(body) = text.strip_suffix('\n') else {
            return Err(err(0, "missing final newline".into()));
        };
        let lines: Vec<&str> = body.split('\n').collect();
        let field = |idx: usize, key: &str| -> Result<&str, SignatureError> {
            lines
                .get(idx)
                .and_then(|l| l.strip_prefix(key))
                .ok_or_else(|| err(idx + 1, format!("expected `{key}` line")))
        };
        if lines[0] != SIGNATURE_MAGIC {
            return Err(err(1, format!("expected `{SIGNATURE_MAGIC}` header")));
        }
        let algorithm =
            HashAlgorithm::from_str(field(1, "alg:")?).map_err(|e| err(2, e.to_string()))?;
        let label = field(2, "label:")?;
        let count_text = field(3, "count:")?;
        let count: usize = count_text
            .parse()
            .ok()
            .filter(|_| {
                !count_text.starts_with('+') && (count_text == "0" || !count_text.starts_with('0'))
            })
            .ok_or_else(|| err(4, format!("bad digest count {count_text:?}")))?;
        let digests = &lines[4..];
        if digests.len() != count {
            return Err(err(
                5 + digests.len().min(count),
                format!("count says {count} digests, found {}", digests.len()),
            ));
        }
        for (i, pair) in digests.windows(2).enumerate() {
            if pair[0] >= pair[1] {
                return Err(err(6 + i, "digests must be strictly ascending".into()));
            }
        }
        ProcessSignature::new(
            algorithm,
            digests.iter().map(|d| d.to_string()).collect(),
            label,
        )
        .map_err(|e| match e {
            SignatureError::Invalid(m) => err(0, m),
            other => other,
        })
    }
}
