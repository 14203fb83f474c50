//! Word-piece vocabulary for the seq2seq backbones.
//!
//! Text is split into words (alphanumeric runs or single punctuation chars);
//! a word preceded by whitespace carries the `▁` prefix. Words missing from
//! the vocabulary fall back to single-char pieces, so any ASCII text encodes
//! without `<unk>`.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];
const SPACE: char = '▁';

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocab {
    pieces: Vec<String>,
    /// Strings kept as one atomic piece, e.g. prompt markers.
    atomic: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.pieces == other.pieces && self.atomic == other.atomic
    }
}

impl Vocab {
    /// Vocabulary over every word of `texts`, plus reserved pieces, the
    /// atomic strings, and single-char pieces for printable ASCII.
    pub fn build<'a>(texts: impl IntoIterator<Item = &'a str>, atomic: &[&str]) -> Vocab {
        let mut vocab = Vocab {
            pieces: Vec::new(),
            atomic: atomic.iter().map(|s| s.to_string()).collect(),
            index: HashMap::new(),
        };
        for r in RESERVED {
            vocab.add(r.to_string());
        }
        for a in atomic {
            vocab.add(a.to_string());
            vocab.add(format!("{SPACE}{a}"));
        }
        for c in (0x21u8..0x7f).map(char::from) {
            vocab.add(c.to_string());
            vocab.add(format!("{SPACE}{c}"));
        }
        let mut words: Vec<String> = Vec::new();
        for text in texts {
            words.extend(vocab.split(text));
        }
        words.sort();
        words.dedup();
        for w in words {
            vocab.add(w);
        }
        vocab
    }

    fn add(&mut self, piece: String) {
        if !self.index.contains_key(&piece) {
            self.index.insert(piece.clone(), self.pieces.len());
            self.pieces.push(piece);
        }
    }

    /// Rebuild the lookup table after deserialization.
    pub fn reindex(&mut self) {
        self.index = self.pieces.iter().enumerate().map(|(i, p)| (p.clone(), i)).collect();
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn piece(&self, id: usize) -> &str {
        &self.pieces[id]
    }

    pub fn id(&self, piece: &str) -> Option<usize> {
        self.index.get(piece).copied()
    }

    /// Words of `text`, each with its space flag folded in.
    fn split(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut space = false;
        let mut i = 0;
        'outer: while i < chars.len() {
            let c = chars[i];
            if c.is_whitespace() {
                space = true;
                i += 1;
                continue;
            }
            let prefix = if space { SPACE.to_string() } else { String::new() };
            space = false;
            for a in &self.atomic {
                let ac: Vec<char> = a.chars().collect();
                if chars[i..].starts_with(&ac) {
                    out.push(format!("{prefix}{a}"));
                    i += ac.len();
                    continue 'outer;
                }
            }
            let start = i;
            if c.is_alphanumeric() || c == '_' {
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
            } else {
                i += 1;
            }
            out.push(format!("{prefix}{}", chars[start..i].iter().collect::<String>()));
        }
        out
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut ids = Vec::new();
        for word in self.split(text) {
            if let Some(id) = self.id(&word) {
                ids.push(id);
                continue;
            }
            let mut chars = word.chars();
            let mut first = chars.next().map(String::from).unwrap_or_default();
            if first.starts_with(SPACE) {
                if let Some(c) = chars.next() {
                    first.push(c);
                }
            }
            ids.push(self.id(&first).unwrap_or(UNK));
            for c in chars {
                ids.push(self.id(&c.to_string()).unwrap_or(UNK));
            }
        }
        ids
    }

    /// Inverse of [`Vocab::encode`] up to whitespace runs; reserved pieces
    /// other than `<unk>` are skipped.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        for &id in ids {
            if matches!(id, PAD | BOS | EOS) || id >= self.pieces.len() {
                continue;
            }
            let piece = &self.pieces[id];
            match piece.strip_prefix(SPACE) {
                Some(rest) => {
                    out.push(' ');
                    out.push_str(rest);
                }
                None => out.push_str(piece),
            }
        }
        out.trim_start().to_string()
    }
}
