use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::annotations::Dataset;
use crate::corpus::Origin;

/// The three most tag-frequent packages of the cross-package protocol.
pub const DEFAULT_PACKAGES: [&str; 3] = ["java.io", "java.util", "javax.swing"];

/// A tag matches a package when it is a substring of one of the package's
/// dot segments after the root (`io` → `java.io`, `swing` → `javax.swing`).
/// Comparison is case-insensitive; the root segment is excluded so a tag
/// such as `java` does not match every package.
pub fn tag_matches_package(tag: &str, package: &str) -> bool {
    let tag = tag.trim().to_lowercase();
    if tag.is_empty() {
        return false;
    }
    let package = package.to_lowercase();
    let segments: Vec<&str> = package.split('.').collect();
    let tail = if segments.len() > 1 { &segments[1..] } else { &segments[..] };
    tail.iter().any(|s| s.contains(tag.as_str()))
}

/// One dataset per package holding every example with a matching tag, in
/// input order. Examples may land in several packages; empty buckets are
/// kept.
pub fn package_split(dataset: &Dataset, packages: &[String]) -> BTreeMap<String, Dataset> {
    packages
        .iter()
        .map(|p| {
            let bucket = dataset.filtered(format!("{}[{p}]", dataset.name), |e| {
                e.sentence.tags.iter().any(|t| tag_matches_package(t, p))
            });
            (p.clone(), bucket)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageStats {
    pub package: String,
    pub sentences: usize,
    pub with_relations: usize,
    /// Unmutated sentences that carry relations.
    pub original_with_relations: usize,
}

pub fn bucket_stats(buckets: &BTreeMap<String, Dataset>) -> Vec<PackageStats> {
    buckets
        .iter()
        .map(|(p, d)| PackageStats {
            package: p.clone(),
            sentences: d.len(),
            with_relations: d.relation_count(),
            original_with_relations: d
                .examples
                .iter()
                .filter(|e| e.has_relations() && e.sentence.origin == Origin::Original)
                .count(),
        })
        .collect()
}
