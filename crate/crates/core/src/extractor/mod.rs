//! Prompt-to-SEL extraction: training corpora, adapters around a
//! conditional generator, and the end-to-end extraction pipeline.

mod adapter;
mod predictions;
mod stub;

pub use adapter::TransformerAdapter;
pub use predictions::{read_predictions, write_predictions, PredictionEntity, PredictionLine, PredictionRelation};
pub use stub::StubAdapter;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::annotations::{Dataset, ExtractionRecord};
use crate::classifier::RelationClassifier;
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::prompt::{build_dynamic_prompt, build_static_prompt, Prompt, DEFAULT_TOP_N};
use crate::sel::{decode_sel, encode_sel, Diagnostic, SelSequence};

/// Backbone name that selects [`StubAdapter`].
pub const STUB_BACKBONE: &str = "stub";

/// How prompts list candidate relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum PromptMode {
    /// All seven relation types.
    Static,
    /// The classifier's top-n types.
    Dynamic(usize),
    /// Entities only: no `[asso]` segment, relation-free target.
    EntityOnly,
    /// Relations only: no `[spot]` segment, the classifier's top-n types,
    /// target keeps only relation endpoints.
    RelationOnly(usize),
}

impl Default for PromptMode {
    fn default() -> Self {
        PromptMode::Dynamic(DEFAULT_TOP_N)
    }
}

impl fmt::Display for PromptMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptMode::Static => f.write_str("static"),
            PromptMode::Dynamic(n) => write!(f, "dynamic:{n}"),
            PromptMode::EntityOnly => f.write_str("entity-only"),
            PromptMode::RelationOnly(n) => write!(f, "relation-only:{n}"),
        }
    }
}

impl FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "static" => Ok(PromptMode::Static),
            "dynamic" => Ok(PromptMode::Dynamic(DEFAULT_TOP_N)),
            "entity-only" => Ok(PromptMode::EntityOnly),
            "relation-only" => Ok(PromptMode::RelationOnly(DEFAULT_TOP_N)),
            other => {
                let parse = |prefix: &str| other.strip_prefix(prefix).and_then(|n| n.parse::<usize>().ok());
                let mode = match (parse("dynamic:"), parse("relation-only:")) {
                    (Some(n), _) => PromptMode::Dynamic(n),
                    (_, Some(n)) => PromptMode::RelationOnly(n),
                    _ => return Err(Error::Config(format!("unknown prompt mode `{other}`"))),
                };
                if let PromptMode::Dynamic(n) | PromptMode::RelationOnly(n) = mode {
                    crate::classifier::check_n(n)?;
                }
                Ok(mode)
            }
        }
    }
}

impl TryFrom<String> for PromptMode {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<PromptMode> for String {
    fn from(m: PromptMode) -> String {
        m.to_string()
    }
}

impl PromptMode {
    pub fn needs_classifier(self) -> bool {
        matches!(self, PromptMode::Dynamic(_) | PromptMode::RelationOnly(_))
    }

    fn classifier(classifier: Option<&dyn RelationClassifier>) -> Result<&dyn RelationClassifier> {
        classifier.ok_or_else(|| Error::Config("dynamic prompts need a relation classifier".into()))
    }

    pub fn prompt(self, text: &str, classifier: Option<&dyn RelationClassifier>) -> Result<Prompt> {
        match self {
            PromptMode::Static => Ok(build_static_prompt(text)),
            PromptMode::Dynamic(n) => build_dynamic_prompt(text, Self::classifier(classifier)?, n),
            PromptMode::EntityOnly => Ok(Prompt::new(Vec::new(), text)),
            PromptMode::RelationOnly(n) => {
                let p = build_dynamic_prompt(text, Self::classifier(classifier)?, n)?;
                Ok(Prompt::relations_only(p.relation_types, text))
            }
        }
    }

    /// The part of a gold record this mode trains the extractor to emit.
    pub fn target(self, gold: &ExtractionRecord) -> ExtractionRecord {
        match self {
            PromptMode::EntityOnly => gold.entities_only(),
            PromptMode::RelationOnly(_) => gold.relations_only(),
            PromptMode::Static | PromptMode::Dynamic(_) => gold.clone(),
        }
    }
}

/// Decoding limits, in vocabulary pieces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationConfig {
    pub max_input_len: usize,
    pub max_output_len: usize,
    /// 1 selects greedy decoding.
    pub beam_size: usize,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            max_input_len: 512,
            max_output_len: 256,
            beam_size: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    #[default]
    Linear,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_fraction: f64,
    pub schedule: Schedule,
    pub optimizer: Optimizer,
    pub seed: u64,
    pub backbone_name: String,
    /// Keep prompt markers as single vocabulary pieces.
    pub add_special_tokens: bool,
    pub max_grad_norm: f64,
    pub generation: GenerationConfig,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            epochs: 50,
            batch_size: 10,
            learning_rate: 1e-4,
            warmup_fraction: 0.06,
            schedule: Schedule::Linear,
            optimizer: Optimizer::Adam,
            seed: 42,
            backbone_name: "seq2seq-base".into(),
            add_special_tokens: true,
            max_grad_norm: 1.0,
            generation: GenerationConfig::default(),
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::Config(format!("warmup_fraction {} not in [0, 1)", self.warmup_fraction)));
        }
        if self.batch_size == 0 || self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return Err(Error::Config("batch_size and learning_rate must be positive".into()));
        }
        let g = &self.generation;
        if g.max_input_len < 1 || g.max_output_len < 2 || g.beam_size == 0 {
            return Err(Error::Config("generation limits must be positive".into()));
        }
        Ok(())
    }
}

/// One supervised example for the extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainPair {
    pub prompt_text: String,
    pub target_sel: String,
}

/// SHA-256 over the pairs, used to tie checkpoints to their corpus.
pub fn corpus_fingerprint(pairs: &[TrainPair]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for p in pairs {
        h.update(p.prompt_text.as_bytes());
        h.update([0]);
        h.update(p.target_sel.as_bytes());
        h.update(*b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One pair per example: the prompt for `mode`, and the SEL of the part
/// of the gold record `mode` targets. Dynamic prompts never filter the
/// target.
pub fn build_training_corpus(
    dataset: &Dataset,
    mode: PromptMode,
    classifier: Option<&dyn RelationClassifier>,
) -> Result<Vec<TrainPair>> {
    if mode.needs_classifier() && classifier.is_none() {
        return Err(Error::Config("dynamic prompts need a relation classifier".into()));
    }
    dataset
        .examples
        .par_iter()
        .map(|e| {
            Ok(TrainPair {
                prompt_text: mode.prompt(&e.sentence.text, classifier)?.render(),
                target_sel: encode_sel(&mode.target(&e.record)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinetuneReport {
    pub epoch_losses: Vec<f64>,
    pub truncated_inputs: usize,
    pub truncated_targets: usize,
    pub corpus_fingerprint: String,
}

/// A text-in/text-out conditional generator.
pub trait Seq2SeqAdapter: Send + Sync {
    fn backbone_name(&self) -> &str;

    /// Generate SEL for a rendered prompt. Never fails on odd model output.
    fn generate(&self, prompt_text: &str) -> Result<SelSequence>;

    fn finetune(&mut self, pairs: &[TrainPair], config: &FinetuneConfig) -> Result<FinetuneReport>;

    fn save(&self, dir: &Path) -> Result<()>;
}

/// A fresh adapter for a backbone name.
pub fn create_adapter(backbone_name: &str, generation: &GenerationConfig) -> Result<Box<dyn Seq2SeqAdapter>> {
    if backbone_name == STUB_BACKBONE {
        return Ok(Box::new(StubAdapter::default()));
    }
    Ok(Box::new(TransformerAdapter::new(backbone_name, generation.clone())?))
}

/// Load a saved adapter of either kind.
pub fn load_adapter(dir: &Path) -> Result<Box<dyn Seq2SeqAdapter>> {
    if StubAdapter::is_checkpoint(dir) {
        Ok(Box::new(StubAdapter::load(dir)?))
    } else {
        Ok(Box::new(TransformerAdapter::load(dir)?))
    }
}

/// Everything extraction needs besides the sentence.
#[derive(Clone, Copy)]
pub struct Pipeline<'a> {
    pub adapter: &'a dyn Seq2SeqAdapter,
    pub classifier: Option<&'a dyn RelationClassifier>,
    pub mode: PromptMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub record: ExtractionRecord,
    pub prompt: String,
    pub sel: String,
    pub diagnostics: Vec<Diagnostic>,
    /// Predicted relations whose type was not among the prompt candidates.
    pub off_candidate_relations: usize,
}

impl<'a> Pipeline<'a> {
    pub fn extract(&self, sentence: &Sentence) -> Result<Extraction> {
        if sentence.text.trim().is_empty() {
            return Ok(Extraction {
                record: ExtractionRecord::new(sentence.sentence_id.clone()),
                prompt: String::new(),
                sel: "()".into(),
                diagnostics: Vec::new(),
                off_candidate_relations: 0,
            });
        }
        let prompt = self.mode.prompt(&sentence.text, self.classifier)?;
        let rendered = prompt.render();
        let sel = self.adapter.generate(&rendered)?;
        let decoded = decode_sel(&sel.text, sentence);
        let off = decoded
            .record
            .relations
            .iter()
            .filter(|r| !prompt.relation_types.contains(&r.relation))
            .count();
        Ok(Extraction {
            record: decoded.record,
            prompt: rendered,
            sel: sel.text,
            diagnostics: decoded.diagnostics,
            off_candidate_relations: off,
        })
    }

    /// [`Pipeline::extract`] over many sentences, in parallel, in order.
    pub fn extract_all(&self, sentences: &[Sentence]) -> Result<Vec<Extraction>> {
        sentences.par_iter().map(|s| self.extract(s)).collect()
    }
}

/// Union of two records for the same sentence.
pub fn merge_records(a: &ExtractionRecord, b: &ExtractionRecord) -> ExtractionRecord {
    let mut out = a.clone();
    out.entities.extend(b.entities.iter().cloned());
    out.relations.extend(b.relations.iter().cloned());
    out.normalized()
}

/// Fine-tune a fresh adapter named by `config.backbone_name` on `dataset`.
pub fn train_extractor(
    dataset: &Dataset,
    mode: PromptMode,
    classifier: Option<&dyn RelationClassifier>,
    config: &FinetuneConfig,
) -> Result<(Box<dyn Seq2SeqAdapter>, FinetuneReport)> {
    config.validate()?;
    let pairs = build_training_corpus(dataset, mode, classifier)?;
    let mut adapter = create_adapter(&config.backbone_name, &config.generation)?;
    let report = adapter.finetune(&pairs, config)?;
    Ok((adapter, report))
}
