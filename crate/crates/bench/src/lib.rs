//! Deterministic inputs shared by the benchmarks in `benches/`.

use apirel::{Dataset, EntityMention, Example, ExtractionRecord, RelationInstance, RelationType, Sentence};

const NAMES: [&str; 8] = [
    "getint()", "get()", "iterator.remove()", "StringBuilder", "List.sort()", "readLine()", "JFrame", "Map.put()",
];
const FILLER: [&str; 4] = ["instead of", "is faster than", "then", "and"];

/// A sentence mentioning `width` APIs with one relation between each
/// neighbouring pair.
pub fn example(i: usize, width: usize) -> Example {
    let id = format!("b{i}");
    let mut text = String::from("Use");
    let mut entities = Vec::new();
    for j in 0..width {
        let name = NAMES[(i + j) % NAMES.len()];
        text.push(' ');
        let start = text.chars().count();
        text.push_str(name);
        entities.push(EntityMention::new(name, start, start + name.chars().count()));
        text.push(' ');
        text.push_str(FILLER[(i + j) % FILLER.len()]);
    }
    text.push_str(" here.");
    let mut record = ExtractionRecord::new(id.clone());
    for (j, pair) in entities.windows(2).enumerate() {
        if pair[0].surface != pair[1].surface {
            let r = RelationType::ALL[(i + j) % RelationType::COUNT];
            record.relations.push(RelationInstance::new(pair[0].clone(), r, pair[1].clone()));
        }
    }
    record.entities = entities;
    Example::new(Sentence::from_text(id, text), record.normalized())
}

pub fn dataset(n: usize, width: usize) -> Dataset {
    Dataset::new("bench", (0..n).map(|i| example(i, width)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples_are_valid() {
        for e in dataset(50, 5).examples {
            e.record.validate(&e.sentence.text).unwrap();
        }
    }
}
