//! GraphML reader and writer for the element subset produced by CFG export
//! tools: `<graph edgedefault="directed">`, `<node id>` with an optional
//! `entry` data key, and `<edge source target>`. Namespaces are ignored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use roxmltree::{Document, Node, TextPos};

use super::{resolve_entry, BlockId, CfgError, ControlFlowGraph, Edge};

fn syntax_at(doc: &Document<'_>, node: Node<'_, '_>, message: impl Into<String>) -> CfgError {
    let TextPos { row, col } = doc.text_pos_at(node.range().start);
    CfgError::syntax(row as usize, col as usize, message)
}

fn required_attr<'a>(
    doc: &Document<'_>,
    node: Node<'a, '_>,
    name: &str,
) -> Result<&'a str, CfgError> {
    node.attribute(name).ok_or_else(|| {
        syntax_at(
            doc,
            node,
            format!("<{}> is missing attribute `{name}`", node.tag_name().name()),
        )
    })
}

/// Parses a GraphML document in the supported subset.
pub fn parse_graphml(text: &str) -> Result<ControlFlowGraph, CfgError> {
    let doc = Document::parse(text).map_err(|e| {
        let pos = e.pos();
        CfgError::syntax(pos.row as usize, pos.col as usize, e.to_string())
    })?;
    let root = doc.root_element();
    if root.tag_name().name() != "graphml" {
        return Err(syntax_at(&doc, root, "root element must be <graphml>"));
    }

    // Map data-key ids to their attribute names so `<data key="d0">` works
    // when `d0` is declared with `attr.name="entry"`.
    let mut key_names: BTreeMap<&str, &str> = BTreeMap::new();
    for key in root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "key")
    {
        if let Some(id) = key.attribute("id") {
            key_names.insert(id, key.attribute("attr.name").unwrap_or(id));
        }
    }

    let graphs: Vec<Node<'_, '_>> = root
        .children()
        .filter(|n| n.is_element() && n.tag_name().name() == "graph")
        .collect();
    let graph = match graphs.as_slice() {
        [g] => *g,
        [] => return Err(syntax_at(&doc, root, "no <graph> element")),
        [_, second, ..] => return Err(syntax_at(&doc, *second, "multiple <graph> elements")),
    };
    match graph.attribute("edgedefault") {
        Some("directed") => {}
        Some(other) => {
            return Err(syntax_at(
                &doc,
                graph,
                format!("edgedefault must be \"directed\", found {other:?}"),
            ))
        }
        None => {
            return Err(syntax_at(
                &doc,
                graph,
                "<graph> is missing edgedefault=\"directed\"",
            ))
        }
    }

    let mut nodes = BTreeSet::new();
    let mut marked = BTreeSet::new();
    let mut raw_edges = Vec::new();
    for child in graph.children().filter(Node::is_element) {
        match child.tag_name().name() {
            "node" => {
                let id = BlockId::new(required_attr(&doc, child, "id")?)
                    .map_err(|e| syntax_at(&doc, child, e.to_string()))?;
                if !nodes.insert(id.clone()) {
                    return Err(syntax_at(&doc, child, format!("duplicate node id {id}")));
                }
                for data in child
                    .children()
                    .filter(|n| n.is_element() && n.tag_name().name() == "data")
                {
                    let key = required_attr(&doc, data, "key")?;
                    if key_names.get(key).copied().unwrap_or(key) != "entry" {
                        continue;
                    }
                    match data.text().map(str::trim) {
                        Some("true") => {
                            marked.insert(id.clone());
                        }
                        Some("false") => {}
                        other => {
                            return Err(syntax_at(
                                &doc,
                                data,
                                format!("entry data must be true or false, found {other:?}"),
                            ))
                        }
                    }
                }
            }
            "edge" => {
                if child.attribute("directed") == Some("false") {
                    return Err(syntax_at(&doc, child, "undirected edges are not supported"));
                }
                let src = required_attr(&doc, child, "source")?;
                let dst = required_attr(&doc, child, "target")?;
                raw_edges.push((child, src, dst));
            }
            // Graph-level data is payload.
            "data" => {}
            other => {
                return Err(syntax_at(
                    &doc,
                    child,
                    format!("unsupported element <{other}>"),
                ));
            }
        }
    }

    let mut edges = BTreeSet::new();
    for (elem, src, dst) in raw_edges {
        let lookup = |id: &str| {
            BlockId::new(id)
                .ok()
                .filter(|b| nodes.contains(b))
                .ok_or_else(|| {
                    syntax_at(
                        &doc,
                        elem,
                        format!("edge endpoint {id:?} is not a declared node"),
                    )
                })
        };
        let edge = Edge::new(lookup(src)?, lookup(dst)?);
        if !edges.insert(edge.clone()) {
            return Err(CfgError::DuplicateEdge(edge));
        }
    }
    if nodes.is_empty() {
        return Err(CfgError::UnknownEntry("graph has no nodes".into()));
    }
    let entry = resolve_entry(&nodes, &edges, &marked)?;
    ControlFlowGraph::new(nodes, edges, entry)
}

/// Writes the graph as GraphML, marking the entry node with the `entry` key.
pub fn to_graphml(g: &ControlFlowGraph) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    out.push_str("  <key id=\"entry\" for=\"node\" attr.name=\"entry\" attr.type=\"boolean\"/>\n");
    out.push_str("  <graph id=\"cfg\" edgedefault=\"directed\">\n");
    for n in g.nodes() {
        if n == g.entry() {
            let _ = writeln!(
                out,
                "    <node id=\"{n}\"><data key=\"entry\">true</data></node>"
            );
        } else {
            let _ = writeln!(out, "    <node id=\"{n}\"/>");
        }
    }
    for e in g.edges() {
        let _ = writeln!(out, "    <edge source=\"{}\" target=\"{}\"/>", e.src, e.dst);
    }
    out.push_str("  </graph>\n</graphml>\n");
    out
}
