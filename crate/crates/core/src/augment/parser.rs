use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use super::inflect::lemmatize;
use crate::corpus::{Sentence, Token};

/// A head → dependent link between token indices of one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyArc {
    pub head_token_index: usize,
    pub dependent_token_index: usize,
    pub label: String,
}

/// Source of dependency arcs over [`Sentence::tokens`].
pub trait DependencyParser: Send + Sync {
    fn parse(&self, sentence: &Sentence) -> Vec<DependencyArc>;
}

const AUXILIARIES: &[&str] = &[
    "will", "would", "can", "could", "should", "must", "may", "might", "shall", "to", "does", "do", "did", "is", "are",
    "was", "were", "be", "been", "not", "cannot", "also", "just", "then", "first",
];

const CLAUSE_WORDS: &[&str] = &["but", "whereas", "while", "because", "although", "though", "unless", "since"];

const CLAUSE_PUNCT: &[&str] = &[",", ";", ":", ".", "!", "?"];

const COMMON_VERBS: &[&str] = &[
    "add", "allow", "call", "change", "check", "close", "compare", "contain", "convert", "create", "define", "delete",
    "execute", "fetch", "find", "get", "handle", "implement", "invoke", "load", "make", "open", "parse", "print",
    "process", "read", "remove", "replace", "return", "run", "save", "set", "sort", "store", "take", "throw", "use",
    "write",
];

/// Clause-local heuristic: a verb is a plain word that follows an
/// auxiliary or lemmatizes into the lexicon; it governs every API-like
/// token in its clause (`nsubj` before it, `obj` after).
#[derive(Debug, Clone)]
pub struct HeuristicParser {
    lexicon: BTreeSet<String>,
}

impl Default for HeuristicParser {
    fn default() -> Self {
        HeuristicParser::with_lexicon(COMMON_VERBS.iter().copied())
    }
}

impl HeuristicParser {
    /// The built-in verb list extended with `lemmas`.
    pub fn with_lexicon<'a>(lemmas: impl IntoIterator<Item = &'a str>) -> Self {
        let mut lexicon: BTreeSet<String> = COMMON_VERBS.iter().map(|s| s.to_string()).collect();
        lexicon.extend(lemmas.into_iter().map(str::to_lowercase));
        HeuristicParser { lexicon }
    }

    fn is_verb(&self, tokens: &[Token], i: usize) -> bool {
        let t = &tokens[i];
        if !is_plain_word(&t.surface) || is_api_like(t) {
            return false;
        }
        let lower = t.surface.to_lowercase();
        if AUXILIARIES.contains(&lower.as_str()) || CLAUSE_WORDS.contains(&lower.as_str()) {
            return false;
        }
        let after_aux = i > 0 && AUXILIARIES.contains(&tokens[i - 1].surface.to_lowercase().as_str());
        after_aux || lemmatize(&lower, |l| self.lexicon.contains(l)).is_some()
    }
}

fn is_plain_word(s: &str) -> bool {
    s.chars().all(char::is_alphabetic) && s.chars().skip(1).all(char::is_lowercase)
}

/// Calls, member accesses, and camel or snake case identifiers.
pub(crate) fn is_api_like(t: &Token) -> bool {
    let s = &t.surface;
    t.is_api_like
        || s.contains('(')
        || s.contains('_')
        || (s.contains('.') && s.chars().any(char::is_alphabetic) && !s.ends_with('.'))
        || s.chars().skip(1).any(char::is_uppercase)
}

fn is_boundary(t: &Token) -> bool {
    CLAUSE_PUNCT.contains(&t.surface.as_str()) || CLAUSE_WORDS.contains(&t.surface.to_lowercase().as_str())
}

impl DependencyParser for HeuristicParser {
    fn parse(&self, sentence: &Sentence) -> Vec<DependencyArc> {
        let tokens = &sentence.tokens;
        let mut clause = vec![0usize; tokens.len()];
        let mut id = 0;
        for (i, t) in tokens.iter().enumerate() {
            if is_boundary(t) {
                id += 1;
            }
            clause[i] = id;
        }
        let mut arcs = Vec::new();
        for v in (0..tokens.len()).filter(|&i| self.is_verb(tokens, i)) {
            for (a, t) in tokens.iter().enumerate() {
                if a != v && clause[a] == clause[v] && is_api_like(t) {
                    arcs.push(DependencyArc {
                        head_token_index: v,
                        dependent_token_index: a,
                        label: if a < v { "nsubj" } else { "obj" }.to_string(),
                    });
                }
            }
        }
        arcs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn surfaces(s: &Sentence, arcs: &[DependencyArc]) -> Vec<(String, String, String)> {
        arcs.iter()
            .map(|a| {
                (
                    s.tokens[a.head_token_index].surface.clone(),
                    s.tokens[a.dependent_token_index].surface.clone(),
                    a.label.clone(),
                )
            })
            .collect()
    }

    #[test]
    fn verb_after_modal_governs_api_subject() {
        let s = Sentence::from_text("s", "nextline() will read the entire line, which is slow");
        let arcs = HeuristicParser::default().parse(&s);
        assert_eq!(surfaces(&s, &arcs), [("read".into(), "nextline()".into(), "nsubj".into())]);
    }

    #[test]
    fn clause_boundaries_block_arcs() {
        let s = Sentence::from_text("s", "StringBuffer is synchronized, but builders use locks");
        let arcs = HeuristicParser::default().parse(&s);
        let heads: Vec<String> = surfaces(&s, &arcs).into_iter().map(|x| x.0).collect();
        assert_eq!(heads, ["synchronized"]);
    }

    #[test]
    fn no_api_token_means_no_arcs() {
        let s = Sentence::from_text("s", "you should read the docs");
        assert!(HeuristicParser::default().parse(&s).is_empty());
    }
}
