//! Sentence-level relation classification used to pick prompt candidates.

mod encoder;
mod keyword;

pub use encoder::{train_classifier, ClassifierConfig, EncoderClassifier};
pub use keyword::KeywordClassifier;

use serde::{Deserialize, Serialize};

use crate::annotations::RelationType;
use crate::error::{Error, Result};

/// Logits `z` and `softmax(z)`, indexed by canonical relation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOutput {
    pub logits: [f64; RelationType::COUNT],
    pub probs: [f64; RelationType::COUNT],
}

impl ClassifierOutput {
    pub fn from_logits(logits: [f64; RelationType::COUNT]) -> Self {
        ClassifierOutput {
            logits,
            probs: softmax(&logits),
        }
    }

    /// Types by descending probability, ties in canonical order.
    pub fn ranked(&self) -> Vec<(RelationType, f64)> {
        let mut ranked: Vec<(RelationType, f64)> = RelationType::ALL.iter().map(|&r| (r, self.probs[r.index()])).collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        ranked
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax<const N: usize>(z: &[f64; N]) -> [f64; N] {
    let lse = log_sum_exp(z);
    let mut out = [0.0; N];
    for (o, v) in out.iter_mut().zip(z) {
        *o = (v - lse).exp();
    }
    out
}

/// Cross-entropy of logits `z` for gold class `c`: `−z[c] + log Σ_j exp(z[j])`.
pub fn relation_loss(z: &[f64], c: usize) -> f64 {
    -z[c] + log_sum_exp(z)
}

pub trait RelationClassifier: Send + Sync {
    fn predict(&self, text: &str) -> ClassifierOutput;

    /// The `n` most probable types; errors unless `1 <= n <= 7`.
    fn predict_topn(&self, text: &str, n: usize) -> Result<Vec<(RelationType, f64)>> {
        check_n(n)?;
        let mut ranked = self.predict(text).ranked();
        ranked.truncate(n);
        Ok(ranked)
    }
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if (1..=RelationType::COUNT).contains(&n) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("top-n must be in 1..=7, got {n}")))
    }
}

/// Classifier returning the same logits for every text.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedClassifier {
    logits: [f64; RelationType::COUNT],
}

impl FixedClassifier {
    pub fn new(logits: [f64; RelationType::COUNT]) -> Self {
        FixedClassifier { logits }
    }
}

impl RelationClassifier for FixedClassifier {
    fn predict(&self, _text: &str) -> ClassifierOutput {
        ClassifierOutput::from_logits(self.logits)
    }
}
