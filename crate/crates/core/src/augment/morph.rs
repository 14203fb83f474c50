use super::{rewrite, Edit};
use crate::annotations::{EntityMention, Example};
use crate::candidate::split_top_level_dots;
use crate::corpus::Origin;

/// The shortened surfaces of a qualified name: the final top-level dot
/// segment as written, then with its trailing parameter list removed.
/// Empty for names without a top-level dot; duplicates collapse.
pub fn short_forms(surface: &str) -> Vec<String> {
    let segments = split_top_level_dots(surface);
    if segments.len() < 2 {
        return Vec::new();
    }
    let last = segments[segments.len() - 1];
    let mut out = vec![last.to_string()];
    let bare = strip_trailing_params(last);
    if !bare.is_empty() && bare != last {
        out.push(bare.to_string());
    }
    out.retain(|s| s != surface && s.chars().any(char::is_alphanumeric));
    out
}

/// `name(args)` → `name`; anything not ending in a balanced group is kept.
fn strip_trailing_params(segment: &str) -> &str {
    if !segment.ends_with(')') {
        return segment;
    }
    let mut depth = 0i32;
    for (i, c) in segment.char_indices().rev() {
        match c {
            ')' => depth += 1,
            '(' => {
                depth -= 1;
                if depth == 0 {
                    return &segment[..i];
                }
            }
            _ => {}
        }
    }
    segment
}

fn qualified(example: &Example) -> Vec<&EntityMention> {
    example
        .record
        .entities
        .iter()
        .filter(|e| e.is_resolved() && !short_forms(&e.surface).is_empty())
        .collect()
}

/// One mutant per (qualified entity, short form), substituting only that
/// entity's mention.
pub fn morph_mutants(example: &Example) -> Vec<Example> {
    let mut out = Vec::new();
    for entity in qualified(example) {
        for form in short_forms(&entity.surface) {
            let id = format!("{}#m{}", example.id(), out.len() + 1);
            let edit = Edit {
                start: entity.char_start,
                end: entity.char_end,
                with: form,
            };
            out.extend(rewrite(example, &[edit], Origin::MorphMutant, id));
        }
    }
    out
}

/// One mutant per short-form rank, substituting every qualified entity at
/// once; entities with a single form reuse it.
pub fn morph_mutants_combined(example: &Example) -> Vec<Example> {
    let entities = qualified(example);
    let mut out = Vec::new();
    for rank in 0..2 {
        let edits: Vec<Edit> = entities
            .iter()
            .map(|e| {
                let forms = short_forms(&e.surface);
                Edit {
                    start: e.char_start,
                    end: e.char_end,
                    with: forms[rank.min(forms.len() - 1)].clone(),
                }
            })
            .collect();
        if edits.is_empty() || (rank == 1 && entities.iter().all(|e| short_forms(&e.surface).len() < 2)) {
            continue;
        }
        let id = format!("{}#m{}", example.id(), out.len() + 1);
        out.extend(rewrite(example, &edits, Origin::MorphMutant, id));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::tests::example;
    use super::*;
    use crate::annotations::RelationType;

    #[test]
    fn iterator_remove_forms() {
        assert_eq!(short_forms("iterator.remove()"), ["remove()", "remove"]);
        assert_eq!(short_forms("Integer.parseInt(s)"), ["parseInt(s)", "parseInt"]);
        assert!(short_forms("get()").is_empty());
        assert!(short_forms("foo(a.b)").is_empty());
        assert_eq!(short_forms("java.util.List"), ["List"]);
    }

    #[test]
    fn qualified_entity_yields_two_mutants_with_shifted_offsets() {
        let e = example(
            "s",
            "Call iterator.remove() instead of list.remove()",
            &["iterator.remove()", "list.remove()"],
            &[(0, RelationType::FunctionReplace, 1)],
        );
        let ms = morph_mutants(&e);
        let texts: Vec<&str> = ms.iter().map(|m| m.sentence.text.as_str()).collect();
        // two qualified entities, two forms each, one substitution per mutant
        assert_eq!(
            texts,
            [
                "Call remove() instead of list.remove()",
                "Call remove instead of list.remove()",
                "Call iterator.remove() instead of remove()",
                "Call iterator.remove() instead of remove",
            ]
        );
        for m in &ms {
            assert!(m.record.validate(&m.sentence.text).is_ok());
            assert_eq!(m.record.relations.len(), 1);
            assert_eq!(m.sentence.origin, Origin::MorphMutant);
            assert_eq!(m.sentence.parent_id.as_deref(), Some("s"));
        }
        assert_eq!(ms[1].record.relations[0].head.surface, "remove");
        assert_eq!(ms[1].record.relations[0].tail.char_start, 23);
    }

    #[test]
    fn unqualified_entity_gives_nothing() {
        let e = example("s", "use get() here", &["get()"], &[]);
        assert!(morph_mutants(&e).is_empty());
        assert!(morph_mutants_combined(&e).is_empty());
    }

    #[test]
    fn combined_substitutes_all_at_once() {
        let e = example("s", "a.x() and b.y()", &["a.x()", "b.y()"], &[]);
        let texts: Vec<String> = morph_mutants_combined(&e).into_iter().map(|m| m.sentence.text).collect();
        assert_eq!(texts, ["x() and y()", "x and y"]);
    }
}
