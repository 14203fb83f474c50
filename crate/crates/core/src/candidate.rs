//! Heuristic API-candidate filter.
//!
//! A token is a candidate API mention when it partially matches a known API
//! name, contains `()`, or contains a `.` that is not part of a number or an
//! ellipsis. Sentences with at least one candidate are kept.

use serde::Serialize;
use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use crate::corpus::{Sentence, Token};
use crate::error::{Error, Result};

/// Known fully-qualified API names with a suffix-chain index.
#[derive(Debug, Clone, Default)]
pub struct ApiInventory {
    entries: BTreeSet<String>,
    /// Lowercase suffix chain (with and without a trailing parameter list)
    /// to the entries that end with it.
    segment_index: HashMap<String, BTreeSet<String>>,
}

impl ApiInventory {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut inv = ApiInventory::default();
        for name in names {
            inv.insert(name.as_ref());
        }
        inv
    }

    pub fn insert(&mut self, name: &str) {
        let name = name.trim();
        if name.is_empty() || !self.entries.insert(name.to_string()) {
            return;
        }
        let lower = name.to_lowercase();
        let segments = split_top_level_dots(&lower);
        for i in 0..segments.len() {
            let chain = segments[i..].join(".");
            let bare = strip_params(&chain).to_string();
            for key in [chain, bare] {
                self.segment_index
                    .entry(key)
                    .or_default()
                    .insert(name.to_string());
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    /// Entries whose suffix chain equals `key` (case-insensitive).
    pub fn lookup(&self, key: &str) -> Option<&BTreeSet<String>> {
        self.segment_index.get(&key.to_lowercase())
    }

    /// Whether `surface` equals a suffix chain of any entry, ignoring case
    /// and a trailing `()`.
    pub fn partially_matches(&self, surface: &str) -> bool {
        let lower = surface.to_lowercase();
        let key = lower.strip_suffix("()").unwrap_or(&lower);
        !key.is_empty() && self.segment_index.contains_key(key)
    }
}

/// Split on dots outside parentheses: `a.b(c.d)` → `["a", "b(c.d)"]`.
pub(crate) fn split_top_level_dots(name: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in name.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            '.' if depth == 0 => {
                out.push(&name[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    out.push(&name[start..]);
    out.retain(|s| !s.is_empty());
    out
}

fn strip_params(chain: &str) -> &str {
    match chain.find('(') {
        Some(p) if chain.ends_with(')') => &chain[..p],
        _ => chain,
    }
}

/// Read one fully-qualified API per line; blank lines and `#` comments are
/// ignored and duplicates collapse.
pub fn load_inventory(path: &Path) -> Result<ApiInventory> {
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let inv = ApiInventory::from_names(
        content
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#')),
    );
    if inv.is_empty() {
        return Err(Error::EmptyInventory(path.to_path_buf()));
    }
    Ok(inv)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CandidateReason {
    PartialMatch,
    HasParens,
    HasDot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateVerdict {
    pub token: Token,
    pub is_candidate: bool,
    pub reasons: BTreeSet<CandidateReason>,
}

/// True for a `.` that is meaningful as a member access: the surface has a
/// letter, so numbers (`3.14`, `1.8.0`) and ellipses are excluded.
fn has_member_dot(surface: &str) -> bool {
    surface.contains('.') && surface.chars().any(char::is_alphabetic)
}

pub fn judge_token(token: &Token, inventory: &ApiInventory) -> CandidateVerdict {
    let mut reasons = BTreeSet::new();
    if inventory.partially_matches(&token.surface) {
        reasons.insert(CandidateReason::PartialMatch);
    }
    if token.surface.contains("()") {
        reasons.insert(CandidateReason::HasParens);
    }
    if has_member_dot(&token.surface) {
        reasons.insert(CandidateReason::HasDot);
    }
    CandidateVerdict {
        token: token.clone(),
        is_candidate: !reasons.is_empty(),
        reasons,
    }
}

/// Keep sentences with at least one candidate token, marking those tokens.
pub fn filter_sentences(sentences: &[Sentence], inventory: &ApiInventory) -> Vec<Sentence> {
    sentences
        .iter()
        .filter_map(|sentence| {
            let mut sentence = sentence.clone();
            let mut any = false;
            for token in &mut sentence.tokens {
                token.is_api_like = judge_token(token, inventory).is_candidate;
                any |= token.is_api_like;
            }
            any.then_some(sentence)
        })
        .collect()
}
