use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::HashSet;

use crate::annotations::{Dataset, Example, RelationType};
use crate::error::{Error, Result};

/// Class label of the entity-only draw.
pub const ENTITY_ONLY_CLASS: &str = "entity only";

#[derive(Debug, Clone, PartialEq)]
pub struct KshotSample {
    pub dataset: Dataset,
    /// The class each example was drawn for, parallel to `dataset.examples`.
    pub classes: Vec<String>,
}

impl KshotSample {
    pub fn class_count(&self, class: &str) -> usize {
        self.classes.iter().filter(|c| *c == class).count()
    }
}

/// `k` examples per relation type, then `k` entity-only examples, drawn
/// without replacement from one pool in that class order. Each pool is
/// shuffled with a seeded ChaCha8 stream.
pub fn kshot_sample(train: &Dataset, k: usize, seed: u64) -> Result<KshotSample> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be positive".into()));
    }
    let classes: Vec<(String, Option<RelationType>)> = RelationType::ALL
        .iter()
        .map(|&r| (r.name().to_string(), Some(r)))
        .chain([(ENTITY_ONLY_CLASS.to_string(), None)])
        .collect();
    let member = |e: &Example, class: Option<RelationType>| match class {
        Some(r) => e.record.relations.iter().any(|x| x.relation == r),
        None => e.is_entity_only(),
    };

    for (name, class) in &classes {
        let available = train.examples.iter().filter(|e| member(e, *class)).count();
        if available < k {
            return Err(Error::InsufficientPool {
                class: name.clone(),
                needed: k,
                available,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut used: HashSet<usize> = HashSet::new();
    let mut examples = Vec::new();
    let mut labels = Vec::new();
    for (name, class) in &classes {
        let mut pool: Vec<usize> = (0..train.len())
            .filter(|i| !used.contains(i) && member(&train.examples[*i], *class))
            .collect();
        if pool.len() < k {
            return Err(Error::InsufficientPool {
                class: name.clone(),
                needed: k,
                available: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        for &i in &pool[..k] {
            used.insert(i);
            examples.push(train.examples[i].clone());
            labels.push(name.clone());
        }
    }
    Ok(KshotSample {
        dataset: Dataset::new(format!("{}-{k}shot-s{seed}", train.name), examples),
        classes: labels,
    })
}
