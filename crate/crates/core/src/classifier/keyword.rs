use regex::Regex;

use super::{ClassifierOutput, RelationClassifier};
use crate::annotations::RelationType;

/// Deterministic phrase-table classifier. Every whole-word phrase match adds
/// `boost` to its relation's logit; text without matches gets uniform
/// probabilities.
#[derive(Debug, Clone)]
pub struct KeywordClassifier {
    table: Vec<(Regex, RelationType)>,
    pub boost: f64,
}

const PHRASES: [(&str, RelationType); 12] = [
    ("instead of", RelationType::FunctionReplace),
    ("faster than", RelationType::EfficiencyComparison),
    ("convert", RelationType::TypeConversion),
    ("same as", RelationType::FunctionSimilarity),
    ("similar", RelationType::FunctionSimilarity),
    ("whereas", RelationType::BehaviorDifference),
    ("but", RelationType::BehaviorDifference),
    ("before", RelationType::LogicConstraint),
    ("after", RelationType::LogicConstraint),
    ("need to", RelationType::LogicConstraint),
    ("together", RelationType::FunctionCollaboration),
    ("then", RelationType::FunctionCollaboration),
];

impl Default for KeywordClassifier {
    fn default() -> Self {
        let table = PHRASES
            .iter()
            .map(|(phrase, r)| {
                let pattern = format!(r"(?i)\b{}\b", regex::escape(phrase).replace(' ', r"\s+"));
                (Regex::new(&pattern).expect("static phrase pattern"), *r)
            })
            .collect();
        KeywordClassifier { table, boost: 2.0 }
    }
}

impl RelationClassifier for KeywordClassifier {
    fn predict(&self, text: &str) -> ClassifierOutput {
        let mut logits = [0.0; RelationType::COUNT];
        for (re, r) in &self.table {
            logits[r.index()] += self.boost * re.find_iter(text).count() as f64;
        }
        ClassifierOutput::from_logits(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn top(text: &str) -> RelationType {
        KeywordClassifier::default().predict_topn(text, 1).unwrap()[0].0
    }

    #[test]
    fn phrase_table_lookup() {
        assert_eq!(top("use X instead of Y"), RelationType::FunctionReplace);
        assert_eq!(top("convert a to b"), RelationType::TypeConversion);
        assert_eq!(top("StringBuilder is faster than StringBuffer"), RelationType::EfficiencyComparison);
        assert_eq!(top("call open() before read()"), RelationType::LogicConstraint);
    }

    #[test]
    fn whole_words_only() {
        // "butter" and "converted" do not match "but"/"convert" as words
        let p = KeywordClassifier::default().predict("butter thence");
        assert!(p.probs.iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-12));
    }

    #[test]
    fn unmatched_text_is_uniform() {
        let p = KeywordClassifier::default().predict("nothing relevant here");
        assert!(p.probs.iter().all(|&v| (v - 1.0 / 7.0).abs() < 1e-12));
    }
}
