//! Fault-tolerant recursive-descent parser for extraction strings.
//!
//! Grammar (whitespace between elements is insignificant):
//!
//! ```text
//! record      := "(" entity_expr* ")"
//! entity_expr := "(" spot_name ":" info_span asso_expr* ")"
//! asso_expr   := "(" asso_name ":" info_span ")"
//! ```
//!
//! Info spans may contain balanced parentheses (`get()`, `valueOf(int)`); a
//! `(` inside a span opens a clause only when it is followed by `name:`.

use super::Diagnostic;
use crate::annotations::RelationType;
use crate::text::normalize_ws;

pub const SPOT_NAME: &str = "API";

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct AssoNode {
    pub relation: RelationType,
    pub span: String,
    pub span_pos: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct EntityNode {
    pub span: String,
    pub span_pos: usize,
    pub assos: Vec<AssoNode>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Level {
    Entity,
    Asso,
}

enum Clause {
    Entity(EntityNode),
    Asso(AssoNode),
    Dropped,
}

pub(crate) struct Parser {
    chars: Vec<char>,
    pos: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl Parser {
    pub fn new(text: &str) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            diagnostics: Vec::new(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn diag(&mut self, position: usize, message: impl Into<String>) {
        self.diagnostics.push(Diagnostic {
            position,
            message: message.into(),
        });
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn skip_until_paren(&mut self) {
        while !matches!(self.peek(), None | Some('(') | Some(')')) {
            self.pos += 1;
        }
    }

    /// Clause name when a clause opener `( name :` starts at `at`.
    fn clause_name_at(&self, at: usize) -> Option<String> {
        if self.chars.get(at) != Some(&'(') {
            return None;
        }
        let mut i = at + 1;
        while i < self.chars.len() && !matches!(self.chars[i], '(' | ')' | ':') {
            i += 1;
        }
        if self.chars.get(i) != Some(&':') {
            return None;
        }
        let name = normalize_ws(&self.chars[at + 1..i].iter().collect::<String>());
        (!name.is_empty()).then_some(name)
    }

    /// Parse a whole record; never fails.
    pub fn parse_record(&mut self) -> Vec<EntityNode> {
        let mut entities = Vec::new();
        self.skip_ws();
        if self.peek().is_none() {
            self.diag(0, "empty input");
            return entities;
        }
        if self.peek() != Some('(') {
            self.diag(self.pos, "expected '(' opening the record");
            while !matches!(self.peek(), None | Some('(')) {
                self.pos += 1;
            }
            if self.peek().is_none() {
                return entities;
            }
        }
        self.pos += 1;
        loop {
            self.skip_ws();
            match self.peek() {
                None => {
                    self.diag(self.pos, "missing ')' closing the record");
                    break;
                }
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                Some('(') => {
                    if let Clause::Entity(node) = self.parse_clause(Level::Entity) {
                        entities.push(node);
                    }
                }
                Some(_) => {
                    self.diag(self.pos, "unexpected text outside a clause");
                    self.skip_until_paren();
                }
            }
        }
        self.skip_ws();
        if self.peek().is_some() {
            self.diag(self.pos, "trailing text after the record");
        }
        entities
    }

    /// Skip a clause whose header is unusable, honoring nested parentheses.
    fn skip_clause_body(&mut self) {
        let mut depth = 1usize;
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                '(' => depth += 1,
                ')' => {
                    depth -= 1;
                    if depth == 0 {
                        return;
                    }
                }
                _ => {}
            }
        }
    }

    fn parse_clause(&mut self, level: Level) -> Clause {
        debug_assert_eq!(self.peek(), Some('('));
        self.pos += 1;
        let name_pos = self.pos;
        while !matches!(self.peek(), None | Some(':') | Some('(') | Some(')')) {
            self.pos += 1;
        }
        if self.peek() != Some(':') {
            self.diag(self.pos, "missing ':' after clause name");
            self.skip_clause_body();
            return Clause::Dropped;
        }
        let name = normalize_ws(&self.chars[name_pos..self.pos].iter().collect::<String>());
        self.pos += 1;

        let (span, span_pos, balanced) = self.parse_span();
        if !balanced {
            // the unclosed '(' is taken as the clause's missing ')'
            self.diag(span_pos, "unbalanced parenthesis in span; clause dropped");
            return Clause::Dropped;
        }

        let mut assos = Vec::new();
        loop {
            self.skip_ws();
            match self.peek() {
                Some(')') => {
                    self.pos += 1;
                    break;
                }
                None => {
                    self.diag(self.pos, "missing ')' closing clause");
                    break;
                }
                Some('(') => {
                    let nested = self.clause_name_at(self.pos);
                    if nested.as_deref() == Some(SPOT_NAME) {
                        let what = match level {
                            Level::Entity => "unclosed entity clause",
                            Level::Asso => "unclosed asso clause",
                        };
                        self.diag(self.pos, what);
                        break;
                    }
                    match level {
                        Level::Entity => {
                            if let Clause::Asso(a) = self.parse_clause(Level::Asso) {
                                assos.push(a);
                            }
                        }
                        Level::Asso => {
                            self.diag(self.pos, "asso cannot nest");
                            let _ = self.parse_clause(Level::Asso);
                        }
                    }
                }
                Some(_) => {
                    self.diag(self.pos, "unexpected text after span");
                    self.skip_until_paren();
                }
            }
        }

        match level {
            Level::Entity if name != SPOT_NAME => {
                let message = if RelationType::from_name(&name).is_some() {
                    format!("asso `{name}` outside an entity clause")
                } else {
                    format!("unknown spot name `{name}`")
                };
                self.diag(name_pos, message);
                Clause::Dropped
            }
            _ if span.is_empty() => {
                self.diag(span_pos, "empty span");
                Clause::Dropped
            }
            Level::Entity => Clause::Entity(EntityNode { span, span_pos, assos }),
            Level::Asso => match RelationType::from_name(&name) {
                Some(relation) => Clause::Asso(AssoNode {
                    relation,
                    span,
                    span_pos,
                }),
                None => {
                    self.diag(name_pos, format!("unknown asso name `{name}`"));
                    Clause::Dropped
                }
            },
        }
    }

    /// Returns (normalized span, start position, parentheses balanced).
    fn parse_span(&mut self) -> (String, usize, bool) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let mut cut: Option<usize> = None;
        let mut depth = 0usize;
        while let Some(c) = self.peek() {
            match c {
                '(' if self.clause_name_at(self.pos).is_some() => break,
                '(' => depth += 1,
                ')' if depth == 0 => break,
                ')' => depth -= 1,
                ':' if cut.is_none() => {
                    self.diag(self.pos, "':' inside span; span cut at the colon");
                    cut = Some(self.pos);
                }
                _ => {}
            }
            self.pos += 1;
        }
        let end = cut.unwrap_or(self.pos);
        let span = normalize_ws(&self.chars[start..end].iter().collect::<String>());
        (span, start, depth == 0)
    }
}
