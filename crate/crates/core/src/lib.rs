//! Joint extraction of API mentions and the semantic relations between them
//! from informal software text, framed as prompt-guided sequence generation.
//!
//! The pipeline:
//!
//! 1. [`corpus`] turns Q&A dump posts into tokenized sentences and
//!    [`candidate`] keeps the ones that may mention APIs.
//! 2. [`annotations`] holds gold entity/relation labels and dataset splits;
//!    [`augment`] grows a split dataset with morphology and verb mutants.
//! 3. [`prompt`] renders `[spot] … [asso] … [text] …` prompts, optionally
//!    listing only the top-N relation types from a [`classifier`].
//! 4. [`extractor`] maps prompts to structured extraction strings, which
//!    [`sel`] encodes and decodes.
//! 5. [`eval`] scores predictions and [`experiments`] runs the study
//!    protocols.

pub mod annotations;
pub mod augment;
pub mod candidate;
pub mod classifier;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod extractor;
pub mod nn;
pub mod prompt;
pub mod sel;
pub mod text;

pub use annotations::{
    Dataset, EntityMention, Example, ExtractionRecord, RelationInstance, RelationType,
};
pub use corpus::{Origin, Sentence, Split, Token};
pub use error::{Error, Result};
pub use eval::{MatchCounts, MetricReport, Prf};
pub use prompt::Prompt;
