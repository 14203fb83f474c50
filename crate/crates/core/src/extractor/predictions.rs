use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::Extraction;
use crate::annotations::{EntityMention, ExtractionRecord, RelationInstance, RelationType};
use crate::error::{Error, Result};

/// Offsets are `null` for spans that could not be located in the text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionEntity {
    pub surface: String,
    pub start: Option<usize>,
    pub end: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRelation {
    pub head: PredictionEntity,
    pub relation: String,
    pub tail: PredictionEntity,
}

/// One line of a prediction JSONL file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionLine {
    pub sentence_id: String,
    pub sel: String,
    #[serde(default)]
    pub diagnostics: Vec<String>,
    #[serde(default)]
    pub off_candidate_relations: usize,
    pub entities: Vec<PredictionEntity>,
    pub relations: Vec<PredictionRelation>,
}

fn to_entity(e: &EntityMention) -> PredictionEntity {
    let resolved = e.is_resolved();
    PredictionEntity {
        surface: e.surface.clone(),
        start: resolved.then_some(e.char_start),
        end: resolved.then_some(e.char_end),
    }
}

fn from_entity(e: &PredictionEntity) -> EntityMention {
    match (e.start, e.end) {
        (Some(s), Some(t)) => EntityMention::new(e.surface.clone(), s, t),
        _ => EntityMention::unresolved(e.surface.clone()),
    }
}

impl PredictionLine {
    pub fn from_extraction(x: &Extraction) -> Self {
        PredictionLine {
            sentence_id: x.record.sentence_id.clone(),
            sel: x.sel.clone(),
            diagnostics: x.diagnostics.iter().map(|d| d.to_string()).collect(),
            off_candidate_relations: x.off_candidate_relations,
            entities: x.record.entities.iter().map(to_entity).collect(),
            relations: x
                .record
                .relations
                .iter()
                .map(|r| PredictionRelation {
                    head: to_entity(&r.head),
                    relation: r.relation.name().to_string(),
                    tail: to_entity(&r.tail),
                })
                .collect(),
        }
    }

    pub fn to_record(&self, line: usize) -> Result<ExtractionRecord> {
        let mut rec = ExtractionRecord::new(self.sentence_id.clone());
        rec.entities = self.entities.iter().map(from_entity).collect();
        for (i, r) in self.relations.iter().enumerate() {
            let relation = RelationType::from_name(&r.relation).ok_or_else(|| {
                Error::schema(line, &format!("relations[{i}].relation"), format!("unknown type `{}`", r.relation))
            })?;
            rec.relations
                .push(RelationInstance::new(from_entity(&r.head), relation, from_entity(&r.tail)));
        }
        Ok(rec.normalized())
    }
}

pub fn write_predictions(extractions: &[Extraction], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for x in extractions {
        let line = serde_json::to_string(&PredictionLine::from_extraction(x)).map_err(|e| Error::Backend(e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Records from a prediction JSONL file; blank lines are skipped.
pub fn read_predictions(path: &Path) -> Result<Vec<ExtractionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PredictionLine =
            serde_json::from_str(&line).map_err(|e| Error::schema(i + 1, "line", e.to_string()))?;
        out.push(parsed.to_record(i + 1)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::UNRESOLVED;
    use crate::sel::Diagnostic;

    #[test]
    fn round_trip_keeps_unresolved_spans() {
        let a = EntityMention::new("a()", 0, 3);
        let b = EntityMention::unresolved("zz()");
        assert_eq!(b.char_start, UNRESOLVED);
        let mut rec = ExtractionRecord::new("s");
        rec.entities = vec![a.clone(), b.clone()];
        rec.relations = vec![RelationInstance::new(a, RelationType::FunctionReplace, b)];
        let rec = rec.normalized();
        let x = Extraction {
            record: rec.clone(),
            prompt: String::new(),
            sel: "(...)".into(),
            diagnostics: vec![Diagnostic {
                position: 3,
                message: "m".into(),
            }],
            off_candidate_relations: 0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        write_predictions(&[x], &path).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), vec![rec]);
        assert!(std::fs::read_to_string(&path).unwrap().contains("\"start\":null"));
    }
}
