//! Marker prompts fed to the extractor:
//! `[spot] API [asso] r1 [asso] r2 ... [text] <sentence>`.

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::annotations::{RelationType, API_ENTITY_TYPE};
use crate::classifier::RelationClassifier;
use crate::error::{Error, Result};

pub const SPOT_MARKER: &str = "[spot]";
pub const ASSO_MARKER: &str = "[asso]";
pub const TEXT_MARKER: &str = "[text]";
pub const MARKERS: [&str; 3] = [SPOT_MARKER, ASSO_MARKER, TEXT_MARKER];

/// Number of candidate relations in a dynamic prompt unless configured.
pub const DEFAULT_TOP_N: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub entity_types: Vec<String>,
    /// Duplicate-free.
    pub relation_types: Vec<RelationType>,
    pub text: String,
}

impl Prompt {
    pub fn new(relation_types: Vec<RelationType>, text: impl Into<String>) -> Self {
        let mut seen = Vec::with_capacity(relation_types.len());
        for r in relation_types {
            if !seen.contains(&r) {
                seen.push(r);
            }
        }
        Prompt {
            entity_types: vec![API_ENTITY_TYPE.to_string()],
            relation_types: seen,
            text: text.into(),
        }
    }

    /// Prompt without a spot segment, used by the relation-only single-task
    /// variant.
    pub fn relations_only(relation_types: Vec<RelationType>, text: impl Into<String>) -> Self {
        Prompt {
            entity_types: Vec::new(),
            ..Prompt::new(relation_types, text)
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.entity_types {
            out.push_str(SPOT_MARKER);
            out.push(' ');
            out.push_str(e);
            out.push(' ');
        }
        for r in &self.relation_types {
            out.push_str(ASSO_MARKER);
            out.push(' ');
            out.push_str(r.name());
            out.push(' ');
        }
        out.push_str(TEXT_MARKER);
        out.push(' ');
        out.push_str(&self.text);
        out
    }

    /// Inverse of [`Prompt::render`].
    pub fn parse(rendered: &str) -> Result<Prompt> {
        let needle = format!("{TEXT_MARKER} ");
        let at = rendered
            .find(&needle)
            .ok_or_else(|| Error::InvalidInput(format!("prompt has no `{TEXT_MARKER}` segment")))?;
        let text = rendered[at + needle.len()..].to_string();
        let mut entity_types = Vec::new();
        let mut relation_types = Vec::new();
        let mut current: Option<(&str, Vec<&str>)> = None;
        let mut flush = |cur: Option<(&str, Vec<&str>)>| -> Result<()> {
            let Some((marker, words)) = cur else { return Ok(()) };
            let name = words.join(" ");
            if marker == SPOT_MARKER {
                entity_types.push(name);
            } else {
                let r = RelationType::from_name(&name)
                    .ok_or_else(|| Error::InvalidInput(format!("unknown relation `{name}` in prompt")))?;
                relation_types.push(r);
            }
            Ok(())
        };
        for word in rendered[..at].split_whitespace() {
            if word == SPOT_MARKER || word == ASSO_MARKER {
                flush(current.take())?;
                current = Some((word, Vec::new()));
            } else if let Some((_, words)) = current.as_mut() {
                words.push(word);
            } else {
                return Err(Error::InvalidInput(format!("text `{word}` before any marker")));
            }
        }
        flush(current)?;
        Ok(Prompt {
            entity_types,
            relation_types,
            text,
        })
    }
}

impl fmt::Display for Prompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// All seven relation types in canonical order.
pub fn build_static_prompt(text: &str) -> Prompt {
    Prompt::new(RelationType::ALL.to_vec(), text)
}

/// The classifier's top-`n` relation types, most probable first.
pub fn build_dynamic_prompt(text: &str, classifier: &dyn RelationClassifier, n: usize) -> Result<Prompt> {
    let top = classifier.predict_topn(text, n)?;
    Ok(Prompt::new(top.into_iter().map(|(r, _)| r).collect(), text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{FixedClassifier, KeywordClassifier};
    use proptest::prelude::*;
    use RelationType::*;

    const REPLACE_TEXT: &str = "You better using getint() instead of get()";

    #[test]
    fn renders_worked_example_exactly() {
        let p = Prompt::new(vec![FunctionReplace, EfficiencyComparison], REPLACE_TEXT);
        assert_eq!(
            p.render(),
            "[spot] API [asso] function replace [asso] efficiency comparison [text] You better using getint() instead of get()"
        );
    }

    #[test]
    fn renders_without_relations() {
        assert_eq!(Prompt::new(vec![], "hello").render(), "[spot] API [text] hello");
        assert_eq!(
            Prompt::relations_only(vec![LogicConstraint], "x").render(),
            "[asso] logic constraint [text] x"
        );
    }

    #[test]
    fn static_prompt_has_all_seven_in_order() {
        let p = build_static_prompt("a");
        assert_eq!(p.relation_types, RelationType::ALL);
        assert_eq!(p.render().matches(ASSO_MARKER).count(), 7);
        assert_eq!(p, build_static_prompt("a"));
        let empty = build_static_prompt("");
        assert_eq!(Prompt::parse(&empty.render()).unwrap(), empty);
    }

    #[test]
    fn dynamic_prompt_orders_by_probability() {
        let mut logits = [0.0; 7];
        logits[FunctionReplace.index()] = 3.0;
        logits[EfficiencyComparison.index()] = 2.0;
        logits[LogicConstraint.index()] = 1.0;
        let c = FixedClassifier::new(logits);
        let p = build_dynamic_prompt(REPLACE_TEXT, &c, 3).unwrap();
        assert_eq!(p.relation_types, [FunctionReplace, EfficiencyComparison, LogicConstraint]);
        let all = build_dynamic_prompt(REPLACE_TEXT, &c, 7).unwrap();
        let mut set = all.relation_types.clone();
        set.sort();
        assert_eq!(set, RelationType::ALL);
    }

    #[test]
    fn dynamic_prompt_ties_go_to_enum_order() {
        let mut logits = [0.0; 7];
        logits[FunctionReplace.index()] = 2.0;
        logits[TypeConversion.index()] = 1.0;
        logits[BehaviorDifference.index()] = 1.0;
        let p = build_dynamic_prompt("t", &FixedClassifier::new(logits), 2).unwrap();
        assert_eq!(p.relation_types, [FunctionReplace, BehaviorDifference]);
    }

    #[test]
    fn dynamic_prompt_rejects_bad_n() {
        let k = KeywordClassifier::default();
        assert!(build_dynamic_prompt("t", &k, 0).is_err());
        assert!(build_dynamic_prompt("t", &k, 8).is_err());
    }

    proptest! {
        #[test]
        fn render_parse_identity(
            idx in prop::collection::vec(0usize..7, 0..7),
            spot in any::<bool>(),
            text in "[ -~]{0,40}",
        ) {
            let rels: Vec<_> = idx.into_iter().map(|i| RelationType::ALL[i]).collect();
            let p = if spot { Prompt::new(rels, text) } else { Prompt::relations_only(rels, text) };
            prop_assert_eq!(Prompt::parse(&p.render()).unwrap(), p);
        }

        #[test]
        fn dynamic_prompt_has_n_markers(n in 1usize..=7, text in "[a-z ]{0,30}") {
            let k = KeywordClassifier::default();
            let p = build_dynamic_prompt(&text, &k, n).unwrap();
            prop_assert_eq!(p.render().matches(ASSO_MARKER).count(), n);
            prop_assert_eq!(p, build_dynamic_prompt(&text, &k, n).unwrap());
        }
    }
}
