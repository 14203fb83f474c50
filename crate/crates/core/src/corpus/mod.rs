//! Turning raw Q&A dump posts into clean, tokenized, tagged sentences.

mod markup;
mod posts;
mod sentence;
mod splitter;
mod tokenizer;

pub use markup::{strip_markup, strip_markup_with, MarkupPolicy};
pub use posts::{load_posts, normalize_tags, select_answer, PostFormat, PostRecord, PostStream};
pub use sentence::{Origin, Sentence, Split, Token};
pub use splitter::{split_sentences, RuleSplitter, SentenceSplitter};
pub use tokenizer::tokenize_software;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::path::Path;

use crate::error::Result;

/// Settings for [`ingest`].
#[derive(Debug, Clone)]
pub struct IngestOptions {
    /// Questions must carry this tag (lowercase).
    pub tag: String,
    /// Sample this many matching questions; `None` keeps all.
    pub sample: Option<usize>,
    pub seed: u64,
    pub markup: MarkupPolicy,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            tag: "java".to_string(),
            sample: None,
            seed: 0,
            markup: MarkupPolicy::default(),
        }
    }
}

/// Result of [`ingest`] with bookkeeping counters.
#[derive(Debug, Default)]
pub struct IngestReport {
    pub sentences: Vec<Sentence>,
    pub questions: usize,
    pub answered: usize,
    pub warnings: usize,
}

/// Full ingestion: pick tagged questions, take each one's most voted answer,
/// strip markup, split into sentences and tokenize.
///
/// Sentences carry the question's tags and the answer's post id.
pub fn ingest(path: &Path, options: &IngestOptions) -> Result<IngestReport> {
    let mut stream = load_posts(path, |_: &[String]| true)?;
    let mut questions = Vec::new();
    let mut answers: HashMap<String, Vec<PostRecord>> = HashMap::new();
    for post in stream.by_ref() {
        let post = post?;
        if post.is_answer {
            if let Some(parent) = post.parent_id.clone() {
                answers.entry(parent).or_default().push(post);
            }
        } else if post.tags.contains(&options.tag) {
            questions.push(post);
        }
    }
    let warnings = stream.warnings();

    if let Some(n) = options.sample {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        questions.shuffle(&mut rng);
        questions.truncate(n);
        // restore file order so output is stable and readable
        questions.sort_by(|a, b| posts::compare_ids(&a.post_id, &b.post_id));
    }

    let splitter = RuleSplitter::default();
    let mut report = IngestReport {
        questions: questions.len(),
        warnings,
        ..Default::default()
    };
    for question in &questions {
        let candidates = answers.remove(&question.post_id).unwrap_or_default();
        let Some(answer) = select_answer(question, &candidates) else {
            continue;
        };
        report.answered += 1;
        let plain = strip_markup_with(&answer.body_markup, &options.markup);
        for (i, text) in splitter.split(&plain).into_iter().enumerate() {
            report.sentences.push(Sentence::new(
                format!("{}-{}", answer.post_id, i),
                text,
                answer.post_id.clone(),
                question.tags.clone(),
            ));
        }
    }
    Ok(report)
}
