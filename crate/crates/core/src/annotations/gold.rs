use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Dataset, EntityMention, Example, ExtractionRecord, RelationInstance, RelationType};
use crate::corpus::{Origin, Sentence, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldEntity {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldRelation {
    pub head_surface: String,
    pub head_start: usize,
    pub relation: String,
    pub tail_surface: String,
    pub tail_start: usize,
}

/// One line of a gold JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldLine {
    pub sentence_id: String,
    pub text: String,
    #[serde(default)]
    pub tags: Vec<String>,
    #[serde(default)]
    pub split: Split,
    #[serde(default)]
    pub origin: Origin,
    #[serde(default)]
    pub parent_id: Option<String>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub post_id: String,
    #[serde(default)]
    pub entities: Vec<GoldEntity>,
    #[serde(default)]
    pub relations: Vec<GoldRelation>,
}

impl GoldLine {
    pub fn from_example(example: &Example) -> Self {
        let s = &example.sentence;
        GoldLine {
            sentence_id: s.sentence_id.clone(),
            text: s.text.clone(),
            tags: s.tags.clone(),
            split: s.split,
            origin: s.origin,
            parent_id: s.parent_id.clone(),
            post_id: s.post_id.clone(),
            entities: example
                .record
                .entities
                .iter()
                .map(|e| GoldEntity {
                    surface: e.surface.clone(),
                    start: e.char_start,
                    end: e.char_end,
                })
                .collect(),
            relations: example
                .record
                .relations
                .iter()
                .map(|r| GoldRelation {
                    head_surface: r.head.surface.clone(),
                    head_start: r.head.char_start,
                    relation: r.relation.name().to_string(),
                    tail_surface: r.tail.surface.clone(),
                    tail_start: r.tail.char_start,
                })
                .collect(),
        }
    }

    /// Build the example, enforcing offset and reference invariants.
    pub fn into_example(self, line: usize) -> Result<Example> {
        if self.sentence_id.trim().is_empty() {
            return Err(Error::schema(line, "sentence_id", "empty"));
        }
        if self.text.trim().is_empty() {
            return Err(Error::schema(line, "text", "empty"));
        }
        if self.origin != Origin::Original && self.parent_id.is_none() {
            return Err(Error::schema(line, "parent_id", "mutant without parent"));
        }
        let mut record = ExtractionRecord::new(self.sentence_id.clone());
        for (i, e) in self.entities.iter().enumerate() {
            let mention = EntityMention::new(e.surface.clone(), e.start, e.end);
            let single = ExtractionRecord {
                sentence_id: String::new(),
                entities: vec![mention.clone()],
                relations: Vec::new(),
            };
            single
                .validate(&self.text)
                .map_err(|m| Error::schema(line, &format!("entities[{i}]"), m))?;
            record.entities.push(mention);
        }
        let by_key: HashMap<(&str, usize), &EntityMention> = record
            .entities
            .iter()
            .map(|e| ((e.surface.as_str(), e.char_start), e))
            .collect();
        let mut relations = Vec::new();
        for (i, r) in self.relations.iter().enumerate() {
            let relation = RelationType::from_name(&r.relation).ok_or_else(|| {
                Error::schema(line, &format!("relations[{i}].relation"), format!("unknown type `{}`", r.relation))
            })?;
            let head = by_key.get(&(r.head_surface.as_str(), r.head_start)).ok_or_else(|| {
                Error::schema(line, &format!("relations[{i}].head"), format!("`{}` is not an entity", r.head_surface))
            })?;
            let tail = by_key.get(&(r.tail_surface.as_str(), r.tail_start)).ok_or_else(|| {
                Error::schema(line, &format!("relations[{i}].tail"), format!("`{}` is not an entity", r.tail_surface))
            })?;
            relations.push(RelationInstance::new((*head).clone(), relation, (*tail).clone()));
        }
        record.relations = relations;
        record.normalize();
        record
            .validate(&self.text)
            .map_err(|m| Error::schema(line, "relations", m))?;

        let mut sentence = Sentence::new(self.sentence_id, self.text, self.post_id, self.tags);
        sentence.split = self.split;
        sentence.origin = self.origin;
        sentence.parent_id = self.parent_id;
        Ok(Example { sentence, record })
    }
}

/// Read a gold JSONL stream.
pub fn read_gold(reader: impl Read, name: &str) -> Result<Dataset> {
    let mut examples = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: GoldLine = serde_json::from_str(&line)
            .map_err(|e| Error::schema(line_no, "<record>", e.to_string()))?;
        if !ids.insert(parsed.sentence_id.clone()) {
            return Err(Error::schema(line_no, "sentence_id", format!("duplicate id `{}`", parsed.sentence_id)));
        }
        examples.push(parsed.into_example(line_no)?);
    }
    let dataset = Dataset::new(name, examples);
    if let Some(v) = super::check_split_hygiene(&dataset).first() {
        return Err(Error::schema(0, "split", v.to_string()));
    }
    Ok(dataset)
}

pub fn load_gold(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_gold(file, &name)
}

pub fn write_gold(dataset: &Dataset, writer: impl Write) -> Result<()> {
    let mut w = BufWriter::new(writer);
    for example in &dataset.examples {
        let line = serde_json::to_string(&GoldLine::from_example(example))
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io("<gold output>", e))?;
    }
    w.flush().map_err(|e| Error::io("<gold output>", e))
}

pub fn save_gold(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_gold(dataset, file)
}

#[cfg(test)]
mod tests {
    use super::*;

    const REPLACE_LINE: &str = r#"{"sentence_id":"s1","text":"You better using getint() instead of get()","tags":["java"],"split":"train","origin":"original","parent_id":null,"entities":[{"surface":"getint()","start":17,"end":25},{"surface":"get()","start":37,"end":42}],"relations":[{"head_surface":"getint()","head_start":17,"relation":"function replace","tail_surface":"get()","tail_start":37}]}"#;
    const ENTITY_ONLY: &str = r#"{"sentence_id":"s2","text":"StringBuffer is synchronized, StringBuilder is not.","split":"test","entities":[{"surface":"StringBuffer","start":0,"end":12},{"surface":"StringBuilder","start":30,"end":43}],"relations":[]}"#;

    #[test]
    fn round_trips_two_examples() {
        let input = format!("{REPLACE_LINE}\n{ENTITY_ONLY}\n");
        let ds = read_gold(input.as_bytes(), "fixture").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.examples[0].record.relations[0].relation, RelationType::FunctionReplace);
        let mut buf = Vec::new();
        write_gold(&ds, &mut buf).unwrap();
        let again = read_gold(buf.as_slice(), "fixture").unwrap();
        assert_eq!(ds, again);
    }

    #[test]
    fn rejects_relation_to_unknown_entity() {
        let bad = REPLACE_LINE.replace(r#""tail_start":37"#, r#""tail_start":36"#);
        let err = read_gold(bad.as_bytes(), "x").unwrap_err().to_string();
        assert!(err.contains("line 1") && err.contains("relations[0].tail"), "{err}");
    }

    #[test]
    fn rejects_offsets_not_matching_surface() {
        let bad = REPLACE_LINE.replace(r#""start":17,"end":25"#, r#""start":16,"end":24"#);
        let err = read_gold(bad.as_bytes(), "x").unwrap_err().to_string();
        assert!(err.contains("entities[0]"), "{err}");
    }

    #[test]
    fn rejects_duplicate_ids_and_unknown_types() {
        let dup = format!("{REPLACE_LINE}\n{REPLACE_LINE}\n");
        assert!(read_gold(dup.as_bytes(), "x").unwrap_err().to_string().contains("duplicate"));
        let bad = REPLACE_LINE.replace("function replace", "function swap");
        assert!(read_gold(bad.as_bytes(), "x").unwrap_err().to_string().contains("relation"));
    }
}
