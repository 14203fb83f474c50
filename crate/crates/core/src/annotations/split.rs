use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::fmt;

use super::Dataset;
use crate::corpus::Split;
use crate::error::{Error, Result};

/// Partition unmutated examples into train and test sets.
///
/// `round(ratio * n)` examples go to train; the choice is a seeded shuffle and
/// each side keeps input order. Mutants must be created after splitting, so
/// their presence is an error.
pub fn make_splits(dataset: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::InvalidInput(format!("split ratio {ratio} outside [0, 1]")));
    }
    if let Some(m) = dataset.examples.iter().find(|e| e.sentence.is_mutant()) {
        return Err(Error::InvalidInput(format!(
            "dataset contains mutant `{}`; split the original sentences before augmenting",
            m.id()
        )));
    }
    let n = dataset.len();
    let n_train = ((ratio * n as f64).round() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_train = vec![false; n];
    for &i in &order[..n_train] {
        is_train[i] = true;
    }
    let mut train = Dataset::new(format!("{}-train", dataset.name), Vec::new());
    let mut test = Dataset::new(format!("{}-test", dataset.name), Vec::new());
    for (i, example) in dataset.examples.iter().enumerate() {
        let mut example = example.clone();
        if is_train[i] {
            example.sentence.split = Split::Train;
            train.examples.push(example);
        } else {
            example.sentence.split = Split::Test;
            test.examples.push(example);
        }
    }
    Ok((train, test))
}

/// A mutant whose parent or sibling sits in a different split.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HygieneViolation {
    pub sentence_id: String,
    pub related_id: String,
    pub sentence_split: Split,
    pub related_split: Split,
}

impl fmt::Display for HygieneViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "`{}` is in {:?} but related `{}` is in {:?}",
            self.sentence_id, self.sentence_split, self.related_id, self.related_split
        )
    }
}

/// Every mutant must share its split with its parent and its siblings.
/// Parents absent from the dataset are not checked.
pub fn check_split_hygiene(dataset: &Dataset) -> Vec<HygieneViolation> {
    let splits: HashMap<&str, Split> = dataset
        .examples
        .iter()
        .map(|e| (e.id(), e.sentence.split))
        .collect();
    let mut family_split: HashMap<&str, (&str, Split)> = HashMap::new();
    let mut violations = Vec::new();
    for e in &dataset.examples {
        let Some(parent) = e.sentence.parent_id.as_deref() else {
            continue;
        };
        let split = e.sentence.split;
        if let Some(&parent_split) = splits.get(parent) {
            if parent_split != split {
                violations.push(HygieneViolation {
                    sentence_id: e.id().to_string(),
                    related_id: parent.to_string(),
                    sentence_split: split,
                    related_split: parent_split,
                });
            }
        }
        match family_split.get(parent) {
            Some(&(sibling, sibling_split)) if sibling_split != split => {
                violations.push(HygieneViolation {
                    sentence_id: e.id().to_string(),
                    related_id: sibling.to_string(),
                    sentence_split: split,
                    related_split: sibling_split,
                });
            }
            Some(_) => {}
            None => {
                family_split.insert(parent, (e.id(), split));
            }
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{Example, ExtractionRecord};
    use crate::corpus::{Origin, Sentence};

    fn originals(n: usize) -> Dataset {
        let examples = (0..n)
            .map(|i| {
                let id = format!("s{i}");
                Example::new(Sentence::from_text(id.clone(), "call get() now"), ExtractionRecord::new(id))
            })
            .collect();
        Dataset::new("d", examples)
    }

    #[test]
    fn ten_originals_split_eight_two() {
        let (train, test) = make_splits(&originals(10), 0.8, 7).unwrap();
        assert_eq!((train.len(), test.len()), (8, 2));
        let train_ids: Vec<_> = train.examples.iter().map(|e| e.id().to_string()).collect();
        assert!(test.examples.iter().all(|e| !train_ids.contains(&e.id().to_string())));
        assert!(train.examples.iter().all(|e| e.sentence.split == Split::Train));
        assert!(test.examples.iter().all(|e| e.sentence.split == Split::Test));
    }

    #[test]
    fn same_seed_same_split() {
        let d = originals(25);
        assert_eq!(make_splits(&d, 0.8, 3).unwrap(), make_splits(&d, 0.8, 3).unwrap());
        assert_ne!(make_splits(&d, 0.8, 3).unwrap().1, make_splits(&d, 0.8, 4).unwrap().1);
    }

    #[test]
    fn mutants_block_splitting() {
        let mut d = originals(3);
        d.examples[1].sentence.origin = Origin::MorphMutant;
        d.examples[1].sentence.parent_id = Some("s0".into());
        assert!(make_splits(&d, 0.8, 1).is_err());
    }

    #[test]
    fn detects_cross_split_mutants() {
        let mut d = originals(3);
        d.examples[0].sentence.split = Split::Train;
        d.examples[1].sentence.split = Split::Test;
        d.examples[1].sentence.origin = Origin::MorphMutant;
        d.examples[1].sentence.parent_id = Some("s0".into());
        assert_eq!(check_split_hygiene(&d).len(), 1);
        d.examples[1].sentence.split = Split::Train;
        assert!(check_split_hygiene(&d).is_empty());
    }

    #[test]
    fn split_sizes_track_ratio() {
        for n in [1usize, 7, 13, 40] {
            for ratio in [0.0, 0.3, 0.8, 1.0] {
                let (train, test) = make_splits(&originals(n), ratio, 11).unwrap();
                assert_eq!(train.len() + test.len(), n);
                assert!((train.len() as f64 - ratio * n as f64).abs() <= 1.0);
            }
        }
    }
}
