//! Gold labels: typed API mentions, directed relations between them, and the
//! dataset/split bookkeeping around annotated sentences.

mod gold;
mod split;

pub use gold::{load_gold, read_gold, save_gold, write_gold, GoldEntity, GoldLine, GoldRelation};
pub use split::{check_split_hygiene, make_splits, HygieneViolation};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::corpus::{Origin, Sentence, Split};
use crate::error::{Error, Result};
use crate::text::{normalize_ws, slice_chars};

/// The seven API relation types, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RelationType {
    FunctionSimilarity,
    BehaviorDifference,
    LogicConstraint,
    TypeConversion,
    FunctionCollaboration,
    EfficiencyComparison,
    FunctionReplace,
}

impl RelationType {
    pub const ALL: [RelationType; 7] = [
        RelationType::FunctionSimilarity,
        RelationType::BehaviorDifference,
        RelationType::LogicConstraint,
        RelationType::TypeConversion,
        RelationType::FunctionCollaboration,
        RelationType::EfficiencyComparison,
        RelationType::FunctionReplace,
    ];

    pub const COUNT: usize = 7;

    /// Space-separated lowercase name used in prompts, SEL and files.
    pub fn name(self) -> &'static str {
        match self {
            RelationType::FunctionSimilarity => "function similarity",
            RelationType::BehaviorDifference => "behavior difference",
            RelationType::LogicConstraint => "logic constraint",
            RelationType::TypeConversion => "type conversion",
            RelationType::FunctionCollaboration => "function collaboration",
            RelationType::EfficiencyComparison => "efficiency comparison",
            RelationType::FunctionReplace => "function replace",
        }
    }

    /// Position in [`RelationType::ALL`]; also the classifier output index.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    /// Parse a name; whitespace runs and underscores are interchangeable.
    pub fn from_name(name: &str) -> Option<Self> {
        let key = normalize_ws(&name.replace('_', " ")).to_lowercase();
        Self::ALL.into_iter().find(|r| r.name() == key)
    }

    /// Undirected types are stored head-first by position.
    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            RelationType::FunctionSimilarity
                | RelationType::BehaviorDifference
                | RelationType::FunctionCollaboration
        )
    }
}

impl fmt::Display for RelationType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RelationType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RelationType::from_name(s).ok_or_else(|| Error::InvalidInput(format!("unknown relation type `{s}`")))
    }
}

impl Serialize for RelationType {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for RelationType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RelationType::from_name(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("unknown relation type `{s}`")))
    }
}

/// The only entity type in this artifact.
pub const API_ENTITY_TYPE: &str = "API";

/// Offset used for mentions whose position in the text is unknown, e.g.
/// generated spans that do not occur in the sentence.
pub const UNRESOLVED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub surface: String,
    pub char_start: usize,
    pub char_end: usize,
    pub entity_type: String,
}

impl EntityMention {
    pub fn new(surface: impl Into<String>, char_start: usize, char_end: usize) -> Self {
        EntityMention {
            surface: surface.into(),
            char_start,
            char_end,
            entity_type: API_ENTITY_TYPE.to_string(),
        }
    }

    pub fn unresolved(surface: impl Into<String>) -> Self {
        EntityMention::new(surface, UNRESOLVED, UNRESOLVED)
    }

    pub fn is_resolved(&self) -> bool {
        self.char_start != UNRESOLVED
    }

    fn sort_key(&self) -> (usize, usize, &str) {
        (self.char_start, self.char_end, &self.surface)
    }

    /// Same mention: equal span and surface.
    pub fn same_span(&self, other: &EntityMention) -> bool {
        self.char_start == other.char_start && self.char_end == other.char_end && self.surface == other.surface
    }
}

impl PartialOrd for EntityMention {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for EntityMention {
    fn cmp(&self, other: &Self) -> Ordering {
        self.sort_key().cmp(&other.sort_key()).then_with(|| self.entity_type.cmp(&other.entity_type))
    }
}

/// A directed relation; `head` owns the relation in SEL.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RelationInstance {
    pub head: EntityMention,
    pub relation: RelationType,
    pub tail: EntityMention,
}

impl RelationInstance {
    pub fn new(head: EntityMention, relation: RelationType, tail: EntityMention) -> Self {
        RelationInstance { head, relation, tail }.canonical()
    }

    /// Symmetric types are stored with the earlier mention as head.
    pub fn canonical(mut self) -> Self {
        if self.relation.is_symmetric() && self.tail < self.head {
            std::mem::swap(&mut self.head, &mut self.tail);
        }
        self
    }

    fn sort_key(&self) -> (&EntityMention, &'static str, &EntityMention) {
        (&self.head, self.relation.name(), &self.tail)
    }
}

/// Entities and relations for one sentence.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExtractionRecord {
    pub sentence_id: String,
    pub entities: Vec<EntityMention>,
    pub relations: Vec<RelationInstance>,
}

impl ExtractionRecord {
    pub fn new(sentence_id: impl Into<String>) -> Self {
        ExtractionRecord {
            sentence_id: sentence_id.into(),
            ..Default::default()
        }
    }

    /// Sort entities by position and relations by (head, type name, tail);
    /// canonicalize symmetric relations; drop duplicates.
    pub fn normalize(&mut self) {
        self.entities.sort();
        self.entities.dedup();
        let relations = std::mem::take(&mut self.relations);
        self.relations = relations.into_iter().map(RelationInstance::canonical).collect();
        self.relations.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self.relations.dedup();
    }

    pub fn normalized(mut self) -> Self {
        self.normalize();
        self
    }

    pub fn has_relations(&self) -> bool {
        !self.relations.is_empty()
    }

    /// Distinct relation types in canonical order.
    pub fn relation_types(&self) -> Vec<RelationType> {
        let mut types: Vec<_> = self.relations.iter().map(|r| r.relation).collect();
        types.sort();
        types.dedup();
        types
    }

    /// Relations of `self`, keeping only entities that participate in one.
    pub fn relations_only(&self) -> ExtractionRecord {
        let mut out = ExtractionRecord::new(self.sentence_id.clone());
        for r in &self.relations {
            out.entities.push(r.head.clone());
            out.entities.push(r.tail.clone());
        }
        out.relations = self.relations.clone();
        out.normalized()
    }

    /// Entities of `self` without relations.
    pub fn entities_only(&self) -> ExtractionRecord {
        ExtractionRecord {
            sentence_id: self.sentence_id.clone(),
            entities: self.entities.clone(),
            relations: Vec::new(),
        }
    }

    /// Check the structural invariants against the sentence text.
    pub fn validate(&self, text: &str) -> std::result::Result<(), String> {
        for (i, e) in self.entities.iter().enumerate() {
            if e.entity_type != API_ENTITY_TYPE {
                return Err(format!("entities[{i}]: entity type `{}` is not API", e.entity_type));
            }
            if e.char_start >= e.char_end {
                return Err(format!("entities[{i}]: empty or inverted span"));
            }
            match slice_chars(text, e.char_start, e.char_end) {
                Some(s) if s == e.surface => {}
                Some(s) => {
                    return Err(format!(
                        "entities[{i}]: surface `{}` does not match text slice `{s}`",
                        e.surface
                    ))
                }
                None => return Err(format!("entities[{i}]: offsets out of range")),
            }
        }
        let mut seen = std::collections::HashSet::new();
        for (i, r) in self.relations.iter().enumerate() {
            if !self.entities.iter().any(|e| e.same_span(&r.head)) {
                return Err(format!("relations[{i}].head: `{}` is not an entity", r.head.surface));
            }
            if !self.entities.iter().any(|e| e.same_span(&r.tail)) {
                return Err(format!("relations[{i}].tail: `{}` is not an entity", r.tail.surface));
            }
            if r.head.same_span(&r.tail) {
                return Err(format!("relations[{i}]: head and tail are the same mention"));
            }
            if !seen.insert((r.head.sort_key(), r.relation, r.tail.sort_key())) {
                return Err(format!("relations[{i}]: duplicate triple"));
            }
        }
        Ok(())
    }
}

/// One annotated sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Example {
    pub sentence: Sentence,
    pub record: ExtractionRecord,
}

impl Example {
    pub fn new(sentence: Sentence, record: ExtractionRecord) -> Self {
        Example { sentence, record }
    }

    pub fn id(&self) -> &str {
        &self.sentence.sentence_id
    }

    pub fn has_relations(&self) -> bool {
        self.record.has_relations()
    }

    /// Has entities but no relation.
    pub fn is_entity_only(&self) -> bool {
        !self.record.entities.is_empty() && self.record.relations.is_empty()
    }
}

/// A named collection of annotated sentences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Dataset {
    pub name: String,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, examples: Vec<Example>) -> Self {
        Dataset {
            name: name.into(),
            examples,
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn get(&self, sentence_id: &str) -> Option<&Example> {
        self.examples.iter().find(|e| e.id() == sentence_id)
    }

    /// Examples in the given split.
    pub fn split(&self, split: Split) -> Dataset {
        self.filtered(format!("{}[{split:?}]", self.name), |e| e.sentence.split == split)
    }

    pub fn filtered(&self, name: impl Into<String>, keep: impl Fn(&Example) -> bool) -> Dataset {
        Dataset::new(name, self.examples.iter().filter(|e| keep(e)).cloned().collect())
    }

    /// Unmutated examples only.
    pub fn originals(&self) -> Dataset {
        self.filtered(format!("{}[original]", self.name), |e| e.sentence.origin == Origin::Original)
    }

    /// Examples that carry at least one relation (the classifier's data).
    pub fn with_relations(&self) -> Dataset {
        self.filtered(format!("{}[relations]", self.name), Example::has_relations)
    }

    pub fn relation_count(&self) -> usize {
        self.examples.iter().filter(|e| e.has_relations()).count()
    }

    /// Stable SHA-256 over the gold serialization.
    pub fn fingerprint(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut hasher = Sha256::new();
        for line in self.examples.iter().map(GoldLine::from_example) {
            hasher.update(serde_json::to_vec(&line).expect("gold lines serialize"));
            hasher.update(b"\n");
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Merge several datasets, keeping the first occurrence of each id.
    pub fn union<'a>(name: impl Into<String>, parts: impl IntoIterator<Item = &'a Dataset>) -> Dataset {
        let mut seen = std::collections::HashSet::new();
        let mut examples = Vec::new();
        for part in parts {
            for e in &part.examples {
                if seen.insert(e.id().to_string()) {
                    examples.push(e.clone());
                }
            }
        }
        Dataset::new(name, examples)
    }
}
