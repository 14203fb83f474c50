//! Label-preserving mutants of annotated sentences: API surface forms
//! shortened to their final name segment, and verbs governing API
//! entities swapped for synonyms.

mod inflect;
mod morph;
mod parser;
mod synonyms;
mod verb;

pub use inflect::{inflect, lemmatize, VerbForm};
pub use morph::{morph_mutants, morph_mutants_combined, short_forms};
pub use parser::{DependencyArc, DependencyParser, HeuristicParser};
pub use synonyms::SynonymSource;
pub use verb::verb_mutants;

use rayon::prelude::*;
use serde::Serialize;
use std::collections::HashSet;

use crate::annotations::{Dataset, EntityMention, Example, ExtractionRecord, RelationInstance};
use crate::corpus::Origin;
use crate::text::{char_len, replace_chars};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentOptions {
    pub morph: bool,
    pub verb: bool,
    /// Substitute every qualified entity of a sentence at once instead of
    /// one entity per mutant.
    pub combined_morph: bool,
}

impl Default for AugmentOptions {
    fn default() -> Self {
        AugmentOptions {
            morph: true,
            verb: true,
            combined_morph: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AugmentReport {
    pub originals: usize,
    pub morph_mutants: usize,
    pub verb_mutants: usize,
    pub duplicates_dropped: usize,
    /// Output size over input size.
    pub growth: f64,
}

/// Originals plus the mutants of every original, in input order with each
/// original followed by its mutants. Mutants are never mutated again;
/// mutants repeating an earlier (text, labels) pair are dropped.
pub fn augment_dataset(
    dataset: &Dataset,
    synonyms: &SynonymSource,
    parser: &dyn DependencyParser,
    options: AugmentOptions,
) -> (Dataset, AugmentReport) {
    let families: Vec<(Vec<Example>, Vec<Example>)> = dataset
        .examples
        .par_iter()
        .map(|e| {
            if e.sentence.is_mutant() {
                return (Vec::new(), Vec::new());
            }
            let morph = match (options.morph, options.combined_morph) {
                (false, _) => Vec::new(),
                (true, false) => morph_mutants(e),
                (true, true) => morph_mutants_combined(e),
            };
            let verb = if options.verb {
                verb_mutants(e, synonyms, &parser.parse(&e.sentence))
            } else {
                Vec::new()
            };
            (morph, verb)
        })
        .collect();

    let mut report = AugmentReport {
        originals: dataset.len(),
        ..AugmentReport::default()
    };
    let mut seen: HashSet<(String, String)> = dataset.examples.iter().map(content_key).collect();
    let mut out = Vec::new();
    for (e, (morph, verb)) in dataset.examples.iter().zip(families) {
        out.push(e.clone());
        for m in morph.into_iter().chain(verb) {
            if !seen.insert(content_key(&m)) {
                report.duplicates_dropped += 1;
                continue;
            }
            match m.sentence.origin {
                Origin::MorphMutant => report.morph_mutants += 1,
                _ => report.verb_mutants += 1,
            }
            out.push(m);
        }
    }
    report.growth = if dataset.is_empty() {
        1.0
    } else {
        out.len() as f64 / dataset.len() as f64
    };
    (Dataset::new(dataset.name.clone(), out), report)
}

/// Text plus labels, ignoring sentence ids.
fn content_key(e: &Example) -> (String, String) {
    let mut r = e.record.clone();
    r.sentence_id.clear();
    (e.sentence.text.clone(), serde_json::to_string(&r.normalized()).expect("record serializes"))
}

/// One text substitution: `[start, end)` becomes `with`.
#[derive(Debug, Clone)]
pub(crate) struct Edit {
    pub start: usize,
    pub end: usize,
    pub with: String,
}

/// Apply non-overlapping edits to an example. Mentions whose span equals an
/// edited range take the new surface; mentions after an edit shift. Returns
/// `None` when an edit cuts through a mention.
pub(crate) fn rewrite(parent: &Example, edits: &[Edit], origin: Origin, id: String) -> Option<Example> {
    let mut edits: Vec<&Edit> = edits.iter().collect();
    edits.sort_by_key(|e| e.start);
    if edits.windows(2).any(|w| w[0].end > w[1].start) {
        return None;
    }
    let map = |m: &EntityMention| -> Option<EntityMention> {
        let mut shift: isize = 0;
        for e in &edits {
            let delta = char_len(&e.with) as isize - (e.end - e.start) as isize;
            if m.char_start == e.start && m.char_end == e.end {
                let start = (m.char_start as isize + shift) as usize;
                let mut out = m.clone();
                out.surface = e.with.clone();
                out.char_start = start;
                out.char_end = start + char_len(&e.with);
                return Some(out);
            }
            if e.end <= m.char_start {
                shift += delta;
            } else if e.start < m.char_end {
                return None;
            }
        }
        let mut out = m.clone();
        out.char_start = (m.char_start as isize + shift) as usize;
        out.char_end = (m.char_end as isize + shift) as usize;
        Some(out)
    };

    let mut text = parent.sentence.text.clone();
    for e in edits.iter().rev() {
        text = replace_chars(&text, e.start, e.end, &e.with);
    }
    let mut record = ExtractionRecord::new(id.clone());
    record.entities = parent.record.entities.iter().map(map).collect::<Option<_>>()?;
    record.relations = parent
        .record
        .relations
        .iter()
        .map(|r| Some(RelationInstance::new(map(&r.head)?, r.relation, map(&r.tail)?)))
        .collect::<Option<_>>()?;
    let record = record.normalized();

    let mut sentence = parent.sentence.clone();
    sentence.sentence_id = id;
    sentence.set_text(text);
    sentence.origin = origin;
    sentence.parent_id = Some(parent.sentence.sentence_id.clone());
    Some(Example::new(sentence, record))
}
