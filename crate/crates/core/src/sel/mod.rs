//! Structured extraction language: a parenthesized linearization of API
//! entities ("spots") and the typed relations ("assos") nested under their
//! head entity.
//!
//! ```text
//! ((API: getint() (function replace: get())) (API: get()))
//! ```
//!
//! Encoding is canonical. Decoding is total: malformed subtrees are dropped
//! with a diagnostic and well-formed siblings are kept.

mod parser;

pub use parser::SPOT_NAME;

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

use crate::annotations::{EntityMention, ExtractionRecord, RelationInstance};
use crate::corpus::Sentence;
use parser::Parser;

/// Grammar accepted without diagnostics.
pub const SEL_GRAMMAR: &str = r#"record      := "(" entity_expr* ")"
entity_expr := "(" spot_name ":" info_span asso_expr* ")"
asso_expr   := "(" asso_name ":" info_span ")"
spot_name   := "API"
asso_name   := one of the 7 relation names
info_span   := text without ':' whose parentheses are balanced and which
               contains no "(" name ":" clause opener"#;

/// A parser finding; `position` is a char offset into the SEL text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub position: usize,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at {}: {}", self.position, self.message)
    }
}

/// SEL text with its strict-grammar diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelSequence {
    pub text: String,
    pub diagnostics: Vec<Diagnostic>,
}

impl SelSequence {
    pub fn new(text: impl Into<String>) -> Self {
        let text = text.into();
        let diagnostics = validate_sel(&text);
        SelSequence { text, diagnostics }
    }

    pub fn is_valid(&self) -> bool {
        self.diagnostics.is_empty()
    }
}

/// Result of decoding generated SEL against a sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub record: ExtractionRecord,
    pub diagnostics: Vec<Diagnostic>,
}

/// Canonical SEL for a record; `()` when the record has no entities.
///
/// Spans are written whitespace-normalized; spans with `:` or unbalanced
/// parentheses cannot be represented and come back altered.
pub fn encode_sel(record: &ExtractionRecord) -> String {
    let mut entities: Vec<&EntityMention> = record.entities.iter().collect();
    entities.sort();
    entities.dedup();
    let mut out = String::from("(");
    for (i, entity) in entities.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push('(');
        out.push_str(SPOT_NAME);
        out.push_str(": ");
        out.push_str(&crate::text::normalize_ws(&entity.surface));
        let mut owned: Vec<&RelationInstance> = record
            .relations
            .iter()
            .filter(|r| r.head.same_span(entity))
            .collect();
        owned.sort_by(|a, b| (a.relation.name(), &a.tail).cmp(&(b.relation.name(), &b.tail)));
        owned.dedup();
        for r in owned {
            out.push_str(" (");
            out.push_str(r.relation.name());
            out.push_str(": ");
            out.push_str(&crate::text::normalize_ws(&r.tail.surface));
            out.push(')');
        }
        out.push(')');
    }
    out.push(')');
    out
}

/// Strict-grammar check; empty iff `text` is well formed.
pub fn validate_sel(text: &str) -> Vec<Diagnostic> {
    let mut parser = Parser::new(text);
    parser.parse_record();
    parser.diagnostics
}

/// Decode against the sentence the SEL describes. Never fails.
pub fn decode_sel(text: &str, sentence: &Sentence) -> Decoded {
    decode_sel_text(text, &sentence.sentence_id, &sentence.text)
}

/// [`decode_sel`] on a bare sentence id and text.
pub fn decode_sel_text(text: &str, sentence_id: &str, sentence_text: &str) -> Decoded {
    let mut parser = Parser::new(text);
    let nodes = parser.parse_record();
    let mut diagnostics = parser.diagnostics;
    let mut locator = Locator::new(sentence_text);
    let mut record = ExtractionRecord::new(sentence_id);

    // spots first: a tail may name an entity declared later
    let mut heads = Vec::with_capacity(nodes.len());
    for node in &nodes {
        let mention = locator.next_mention(&node.span);
        if !mention.is_resolved() {
            diagnostics.push(Diagnostic {
                position: node.span_pos,
                message: format!("span `{}` not found in sentence", node.span),
            });
        }
        heads.push(mention.clone());
        record.entities.push(mention);
    }

    for (node, head) in nodes.iter().zip(&heads) {
        for asso in &node.assos {
            let existing = record
                .entities
                .iter()
                .find(|e| e.surface == asso.span && !e.same_span(head))
                .cloned();
            let tail = match existing {
                Some(t) => t,
                None => {
                    let t = locator.next_mention(&asso.span);
                    diagnostics.push(Diagnostic {
                        position: asso.span_pos,
                        message: format!("asso span `{}` not declared as an entity", asso.span),
                    });
                    if !t.is_resolved() {
                        diagnostics.push(Diagnostic {
                            position: asso.span_pos,
                            message: format!("span `{}` not found in sentence", asso.span),
                        });
                    }
                    record.entities.push(t.clone());
                    t
                }
            };
            if tail.same_span(head) {
                diagnostics.push(Diagnostic {
                    position: asso.span_pos,
                    message: "relation from a mention to itself".into(),
                });
                continue;
            }
            record
                .relations
                .push(RelationInstance::new(head.clone(), asso.relation, tail));
        }
    }
    record.normalize();
    Decoded { record, diagnostics }
}

/// Assigns the k-th request for a surface to its k-th occurrence in the
/// sentence, preferring occurrences on token boundaries.
struct Locator {
    chars: Vec<char>,
    cursor: HashMap<String, usize>,
    cache: HashMap<String, Vec<(usize, usize)>>,
}

impl Locator {
    fn new(text: &str) -> Self {
        Locator {
            chars: text.chars().collect(),
            cursor: HashMap::new(),
            cache: HashMap::new(),
        }
    }

    fn next_mention(&mut self, surface: &str) -> EntityMention {
        if !self.cache.contains_key(surface) {
            let occ = occurrences(&self.chars, surface);
            self.cache.insert(surface.to_string(), occ);
        }
        let occ = &self.cache[surface];
        let k = self.cursor.entry(surface.to_string()).or_insert(0);
        let found = occ.get(*k).copied();
        *k += 1;
        match found {
            Some((s, e)) => EntityMention::new(surface, s, e),
            None => EntityMention::unresolved(surface),
        }
    }
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Non-overlapping occurrences of `surface`, boundary-respecting ones if any.
fn occurrences(chars: &[char], surface: &str) -> Vec<(usize, usize)> {
    let needle: Vec<char> = surface.chars().collect();
    let n = needle.len();
    if n == 0 || n > chars.len() {
        return Vec::new();
    }
    let mut all = Vec::new();
    let mut i = 0;
    while i + n <= chars.len() {
        if chars[i..i + n] == needle[..] {
            all.push((i, i + n));
            i += n;
        } else {
            i += 1;
        }
    }
    let bounded: Vec<_> = all
        .iter()
        .copied()
        .filter(|&(s, e)| {
            let before_ok = s == 0 || !(is_word(chars[s - 1]) || chars[s - 1] == '.');
            // `Zm` inside `Zm()` is a prefix of a call, not a mention
            let after_ok = e == chars.len()
                || !(is_word(chars[e])
                    || (chars[e] == '(' && is_word(chars[e - 1]))
                    || (chars[e] == '.' && chars.get(e + 1).is_some_and(|&c| is_word(c))));
            before_ok && after_ok
        })
        .collect();
    if bounded.is_empty() {
        all
    } else {
        bounded
    }
}
