use serde::{Deserialize, Serialize};

use super::tokenizer::tokenize_software;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    #[default]
    Original,
    MorphMutant,
    VerbMutant,
}

/// A token with char offsets into its sentence text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    #[serde(default)]
    pub is_api_like: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub sentence_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    #[serde(default)]
    pub post_id: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default)]
    pub parent_id: Option<String>,
}

impl Sentence {
    /// An original, unassigned sentence tokenized with the software tokenizer.
    pub fn new(
        sentence_id: impl Into<String>,
        text: impl Into<String>,
        post_id: impl Into<String>,
        tags: Vec<String>,
    ) -> Self {
        let text = text.into();
        Sentence {
            sentence_id: sentence_id.into(),
            tokens: tokenize_software(&text),
            text,
            post_id: post_id.into(),
            tags,
            split: Split::Unassigned,
            origin: Origin::Original,
            parent_id: None,
        }
    }

    /// Convenience constructor used throughout tests and fixtures.
    pub fn from_text(sentence_id: impl Into<String>, text: impl Into<String>) -> Self {
        Sentence::new(sentence_id, text, "", Vec::new())
    }

    /// Replace the text and re-tokenize.
    pub fn set_text(&mut self, text: String) {
        self.tokens = tokenize_software(&text);
        self.text = text;
    }

    pub fn is_mutant(&self) -> bool {
        self.origin != Origin::Original
    }
}
