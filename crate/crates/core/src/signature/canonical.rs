use std::fmt;

use crate::arborescence::Arborescence;

/// ASCII rendering of an arborescence:
/// `nodes:<ids>;edges:<src>...;root:<id>` with `,`-joined, sorted lists.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalString(String);

impl CanonicalString {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl fmt::Display for CanonicalString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonicalize(a: &Arborescence) -> CanonicalString {
    // Node and edge sets are ordered collections, so iteration is already sorted.
    let nodes: Vec<&str> = a.nodes().iter().map(|n| n.as_str()).collect();
    let edges: Vec<String> = a.edges().iter().map(|e| e.to_string()).collect();
    CanonicalString(format!(
        "nodes:{};edges:{};root:{}",
        nodes.join(","),
        edges.join(","),
        a.root()
    ))
}
