//! Reader and writer for the DOT subset used by CFG exports:
//! `digraph NAME { ID; ID [entry=true]; ID -> ID; }` with `//` and `/* */`
//! comments.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::{resolve_entry, BlockId, CfgError, ControlFlowGraph, Edge};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Ident(String),
    Quoted(String),
    Arrow,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Semi,
    Comma,
    Eq,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Quoted(s) => format!("string \"{s}\""),
            Tok::Arrow => "`->`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Pos {
    line: usize,
    column: usize,
}

struct Lexer<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            chars: text.chars().peekable(),
            line: 1,
            column: 1,
        }
    }

    fn pos(&self) -> Pos {
        Pos {
            line: self.line,
            column: self.column,
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn peek2(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }

    fn skip_trivia(&mut self) -> Result<(), CfgError> {
        loop {
            match self.chars.peek().copied() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.peek2() == Some('/') => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('/') if self.peek2() == Some('*') => {
                    let start = self.pos();
                    self.bump();
                    self.bump();
                    let mut closed = false;
                    while let Some(c) = self.bump() {
                        if c == '*' && self.chars.peek() == Some(&'/') {
                            self.bump();
                            closed = true;
                            break;
                        }
                    }
                    if !closed {
                        return Err(CfgError::syntax(
                            start.line,
                            start.column,
                            "unterminated block comment",
                        ));
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn next_token(&mut self) -> Result<(Tok, Pos), CfgError> {
        self.skip_trivia()?;
        let pos = self.pos();
        let Some(&c) = self.chars.peek() else {
            return Ok((Tok::Eof, pos));
        };
        let single = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '[' => Some(Tok::LBracket),
            ']' => Some(Tok::RBracket),
            ';' => Some(Tok::Semi),
            ',' => Some(Tok::Comma),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = single {
            self.bump();
            return Ok((tok, pos));
        }
        if c == '-' && self.peek2() == Some('>') {
            self.bump();
            self.bump();
            return Ok((Tok::Arrow, pos));
        }
        if c == '"' {
            self.bump();
            let mut s = String::new();
            loop {
                match self.bump() {
                    Some('\\') => match self.bump() {
                        Some(esc) => s.push(esc),
                        None => break,
                    },
                    Some('"') => return Ok((Tok::Quoted(s), pos)),
                    Some(ch) => s.push(ch),
                    None => break,
                }
            }
            return Err(CfgError::syntax(
                pos.line,
                pos.column,
                "unterminated string",
            ));
        }
        if !c.is_ascii_graphic() {
            return Err(CfgError::syntax(
                pos.line,
                pos.column,
                format!("unexpected character {c:?}"),
            ));
        }
        let mut s = String::new();
        while let Some(&ch) = self.chars.peek() {
            if !ch.is_ascii_graphic() || "\"[];,{}=".contains(ch) {
                break;
            }
            if ch == '-' && self.peek2() == Some('>') {
                break;
            }
            if ch == '/' && matches!(self.peek2(), Some('/') | Some('*')) {
                break;
            }
            s.push(ch);
            self.bump();
        }
        Ok((Tok::Ident(s), pos))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    current: (Tok, Pos),
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Result<Self, CfgError> {
        let mut lexer = Lexer::new(text);
        let current = lexer.next_token()?;
        Ok(Parser { lexer, current })
    }

    fn advance(&mut self) -> Result<(Tok, Pos), CfgError> {
        let next = self.lexer.next_token()?;
        Ok(std::mem::replace(&mut self.current, next))
    }

    fn error_here(&self, message: impl Into<String>) -> CfgError {
        CfgError::syntax(self.current.1.line, self.current.1.column, message)
    }

    fn expect(&mut self, want: Tok) -> Result<Pos, CfgError> {
        if self.current.0 == want {
            Ok(self.advance()?.1)
        } else {
            Err(self.error_here(format!(
                "expected {}, found {}",
                want.describe(),
                self.current.0.describe()
            )))
        }
    }

    fn block_id(&mut self) -> Result<BlockId, CfgError> {
        match self.advance()? {
            (Tok::Ident(s), pos) => {
                BlockId::new(s).map_err(|e| CfgError::syntax(pos.line, pos.column, e.to_string()))
            }
            (other, pos) => Err(CfgError::syntax(
                pos.line,
                pos.column,
                format!("expected node id, found {}", other.describe()),
            )),
        }
    }

    /// Parses `[key=value, ...]` after a node id. Returns whether the node
    /// was marked as entry.
    fn node_attrs(&mut self) -> Result<bool, CfgError> {
        self.expect(Tok::LBracket)?;
        let mut entry = false;
        loop {
            let (key, key_pos) = match self.advance()? {
                (Tok::RBracket, _) => return Ok(entry),
                (Tok::Ident(k), pos) => (k, pos),
                (other, pos) => {
                    return Err(CfgError::syntax(
                        pos.line,
                        pos.column,
                        format!("expected attribute name, found {}", other.describe()),
                    ))
                }
            };
            self.expect(Tok::Eq)?;
            let value = match self.advance()? {
                (Tok::Ident(v), _) | (Tok::Quoted(v), _) => v,
                (other, pos) => {
                    return Err(CfgError::syntax(
                        pos.line,
                        pos.column,
                        format!("expected attribute value, found {}", other.describe()),
                    ))
                }
            };
            match key.as_str() {
                "entry" => match value.as_str() {
                    "true" => entry = true,
                    "false" => {}
                    _ => {
                        return Err(CfgError::syntax(
                            key_pos.line,
                            key_pos.column,
                            format!("entry attribute must be true or false, found {value:?}"),
                        ))
                    }
                },
                // Block payload is not part of the structure.
                "label" => {}
                _ => {
                    return Err(CfgError::syntax(
                        key_pos.line,
                        key_pos.column,
                        format!("unsupported attribute `{key}`"),
                    ))
                }
            }
            if self.current.0 == Tok::Comma {
                self.advance()?;
            }
        }
    }
}

/// Parses a DOT document in the supported subset.
pub fn parse_dot(text: &str) -> Result<ControlFlowGraph, CfgError> {
    let mut p = Parser::new(text)?;
    match p.advance()? {
        (Tok::Ident(kw), _) if kw.eq_ignore_ascii_case("digraph") => {}
        (other, pos) => {
            return Err(CfgError::syntax(
                pos.line,
                pos.column,
                format!("expected `digraph`, found {}", other.describe()),
            ))
        }
    }
    if matches!(p.current.0, Tok::Ident(_) | Tok::Quoted(_)) {
        p.advance()?;
    }
    p.expect(Tok::LBrace)?;

    let mut nodes = BTreeSet::new();
    let mut edges = BTreeSet::new();
    let mut marked = BTreeSet::new();

    loop {
        if p.current.0 == Tok::RBrace {
            p.advance()?;
            break;
        }
        if p.current.0 == Tok::Semi {
            p.advance()?;
            continue;
        }
        let src = p.block_id()?;
        nodes.insert(src.clone());
        match p.current.0 {
            Tok::Arrow => {
                p.advance()?;
                let dst = p.block_id()?;
                nodes.insert(dst.clone());
                if p.current.0 == Tok::Arrow {
                    return Err(p.error_here("edge chains are not supported"));
                }
                if p.current.0 == Tok::LBracket {
                    return Err(p.error_here("edge attributes are not supported"));
                }
                let edge = Edge::new(src, dst);
                if !edges.insert(edge.clone()) {
                    return Err(CfgError::DuplicateEdge(edge));
                }
            }
            Tok::LBracket => {
                let is_entry = p.node_attrs()?;
                if is_entry {
                    marked.insert(src);
                }
            }
            _ => {}
        }
        match p.current.0 {
            Tok::Semi => {
                p.advance()?;
            }
            Tok::RBrace | Tok::Ident(_) => {}
            ref other => {
                let msg = format!("unexpected {} after statement", other.describe());
                return Err(p.error_here(msg));
            }
        }
    }
    if p.current.0 != Tok::Eof {
        return Err(p.error_here(format!(
            "trailing {} after graph body",
            p.current.0.describe()
        )));
    }
    if nodes.is_empty() {
        return Err(CfgError::UnknownEntry("graph has no nodes".into()));
    }
    let entry = resolve_entry(&nodes, &edges, &marked)?;
    ControlFlowGraph::new(nodes, edges, entry)
}

/// Writes the graph in the DOT subset. Node and edge order are lexicographic
/// and the entry is always marked, so the output reparses to an equal value.
pub fn to_dot(g: &ControlFlowGraph) -> String {
    let mut out = String::from("digraph cfg {\n");
    for n in g.nodes() {
        if n == g.entry() {
            let _ = writeln!(out, "  {n} [entry=true];");
        } else {
            let _ = writeln!(out, "  {n};");
        }
    }
    for e in g.edges() {
        let _ = writeln!(out, "  {} -> {};", e.src, e.dst);
    }
    out.push_str("}\n");
    out
}
