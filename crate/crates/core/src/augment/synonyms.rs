use serde::Deserialize;
use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};

/// Verb lemma → synonym lemmas, all single lowercase words.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SynonymSource {
    map: BTreeMap<String, Vec<String>>,
}

#[derive(Deserialize)]
struct SynonymLine {
    lemma: String,
    synonyms: Vec<String>,
}

fn is_word(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphabetic() || c == '-')
}

impl SynonymSource {
    /// Lowercases everything, drops self-mappings and repeats, and rejects
    /// multi-word entries and lemmas left without synonyms.
    pub fn new(map: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut out = BTreeMap::new();
        for (lemma, synonyms) in map {
            let lemma = lemma.trim().to_lowercase();
            if !is_word(&lemma) {
                return Err(Error::InvalidInput(format!("synonym lemma `{lemma}` is not a single word")));
            }
            let mut list: Vec<String> = Vec::new();
            for s in synonyms {
                let s = s.trim().to_lowercase();
                if !is_word(&s) {
                    return Err(Error::InvalidInput(format!("synonym `{s}` of `{lemma}` is not a single word")));
                }
                if s != lemma && !list.contains(&s) {
                    list.push(s);
                }
            }
            if list.is_empty() {
                return Err(Error::InvalidInput(format!("lemma `{lemma}` has no synonyms")));
            }
            out.entry(lemma).or_insert_with(Vec::new).extend(list);
        }
        for list in out.values_mut() {
            let mut seen = std::collections::HashSet::new();
            list.retain(|s| seen.insert(s.clone()));
        }
        Ok(SynonymSource { map: out })
    }

    /// JSONL lines `{"lemma": ..., "synonyms": [...]}`; blank lines skipped.
    pub fn read_jsonl(reader: impl Read) -> Result<Self> {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (i, line) in BufReader::new(reader).lines().enumerate() {
            let line = line.map_err(|e| Error::InvalidInput(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SynonymLine =
                serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, "line", e.to_string()))?;
            map.entry(parsed.lemma).or_default().extend(parsed.synonyms);
        }
        SynonymSource::new(map)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        SynonymSource::read_jsonl(file)
    }

    pub fn get(&self, lemma: &str) -> Option<&[String]> {
        self.map.get(lemma).map(Vec::as_slice)
    }

    pub fn contains(&self, lemma: &str) -> bool {
        self.map.contains_key(lemma)
    }

    pub fn lemmas(&self) -> impl Iterator<Item = &str> {
        self.map.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}
