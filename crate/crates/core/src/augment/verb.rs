use std::collections::BTreeSet;

use super::inflect::{inflect, lemmatize, match_case};
use super::{rewrite, DependencyArc, Edit, SynonymSource};
use crate::annotations::Example;
use crate::corpus::Origin;

/// One mutant per (governing verb, synonym). A verb qualifies when an arc
/// links it to a token overlapping a resolved API entity, the verb itself
/// lies outside every entity, and its lemma has synonyms. The synonym takes
/// the verb's inflection and capitalization.
pub fn verb_mutants(example: &Example, synonyms: &SynonymSource, arcs: &[DependencyArc]) -> Vec<Example> {
    let tokens = &example.sentence.tokens;
    let in_entity = |i: usize| {
        let t = &tokens[i];
        example
            .record
            .entities
            .iter()
            .any(|e| e.is_resolved() && e.char_start < t.char_end && t.char_start < e.char_end)
    };
    let mut verbs = BTreeSet::new();
    for arc in arcs {
        let (h, d) = (arc.head_token_index, arc.dependent_token_index);
        if h >= tokens.len() || d >= tokens.len() {
            continue;
        }
        match (in_entity(h), in_entity(d)) {
            (false, true) => verbs.insert(h),
            (true, false) => verbs.insert(d),
            _ => false,
        };
    }
    let mut out = Vec::new();
    for v in verbs {
        let token = &tokens[v];
        let Some((lemma, form)) = lemmatize(&token.surface, |l| synonyms.contains(l)) else {
            continue;
        };
        for synonym in synonyms.get(&lemma).unwrap_or_default() {
            let id = format!("{}#v{}", example.id(), out.len() + 1);
            let edit = Edit {
                start: token.char_start,
                end: token.char_end,
                with: match_case(&token.surface, &inflect(synonym, form)),
            };
            out.extend(rewrite(example, &[edit], Origin::VerbMutant, id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::example;
    use super::super::{DependencyParser, HeuristicParser};
    use super::*;
    use crate::annotations::RelationType;

    fn syn(pairs: &[(&str, &[&str])]) -> SynonymSource {
        SynonymSource::new(
            pairs
                .iter()
                .map(|(l, s)| (l.to_string(), s.iter().map(|x| x.to_string()).collect()))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn read_becomes_load() {
        let e = example(
            "s",
            "nextline() will read the entire line, whereas next() stops at spaces",
            &["nextline()", "next()"],
            &[(0, RelationType::BehaviorDifference, 1)],
        );
        let arcs = HeuristicParser::default().parse(&e.sentence);
        let ms = verb_mutants(&e, &syn(&[("read", &["load"])]), &arcs);
        assert_eq!(ms.len(), 1);
        assert_eq!(
            ms[0].sentence.text,
            "nextline() will load the entire line, whereas next() stops at spaces"
        );
        assert_eq!(ms[0].sentence.origin, Origin::VerbMutant);
        assert_eq!(ms[0].record.relations.len(), 1);
        assert!(ms[0].record.validate(&ms[0].sentence.text).is_ok());
    }

    #[test]
    fn inflection_and_case_carry_over() {
        let e = example("s", "Reads from get() and parser.next() reads too", &["get()", "parser.next()"], &[]);
        let arcs = vec![
            DependencyArc {
                head_token_index: 0,
                dependent_token_index: 2,
                label: "obj".into(),
            },
            DependencyArc {
                head_token_index: 5,
                dependent_token_index: 4,
                label: "nsubj".into(),
            },
        ];
        let texts: Vec<String> = verb_mutants(&e, &syn(&[("read", &["load", "fetch"])]), &arcs)
            .into_iter()
            .map(|m| m.sentence.text)
            .collect();
        assert_eq!(
            texts,
            [
                "Loads from get() and parser.next() reads too",
                "Fetches from get() and parser.next() reads too",
                "Reads from get() and parser.next() loads too",
                "Reads from get() and parser.next() fetches too",
            ]
        );
    }

    #[test]
    fn verbs_without_arc_to_an_entity_are_untouched() {
        let e = example("s", "you read the docs before get()", &["get()"], &[]);
        let arcs = vec![DependencyArc {
            head_token_index: 1,
            dependent_token_index: 3,
            label: "obj".into(),
        }];
        assert!(verb_mutants(&e, &syn(&[("read", &["load"])]), &arcs).is_empty());
        let out_of_range = vec![DependencyArc {
            head_token_index: 1,
            dependent_token_index: 99,
            label: "obj".into(),
        }];
        assert!(verb_mutants(&e, &syn(&[("read", &["load"])]), &out_of_range).is_empty());
    }
}
