//! Strict surface matching and micro-averaged precision/recall/F1.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::hash::Hash;

use crate::annotations::{Dataset, ExtractionRecord, RelationType};
use crate::error::{Error, Result};
use crate::text::normalize_ws;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub true_positive: usize,
    pub predicted_total: usize,
    pub gold_total: usize,
}

impl MatchCounts {
    pub fn add(&mut self, other: MatchCounts) {
        self.true_positive += other.true_positive;
        self.predicted_total += other.predicted_total;
        self.gold_total += other.gold_total;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    /// F1 from precision and recall; 0 when both are 0.
    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Prf { precision, recall, f1 }
    }
}

/// Precision, recall and F1, each 0 when its denominator is 0.
pub fn prf(c: MatchCounts) -> Prf {
    let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
    Prf::from_pr(ratio(c.true_positive, c.predicted_total), ratio(c.true_positive, c.gold_total))
}

fn multiset<K: Eq + Hash>(items: impl IntoIterator<Item = K>) -> HashMap<K, usize> {
    let mut m = HashMap::new();
    for k in items {
        *m.entry(k).or_insert(0) += 1;
    }
    m
}

fn intersect<K: Eq + Hash>(gold: Vec<K>, pred: Vec<K>) -> MatchCounts {
    let (g_total, p_total) = (gold.len(), pred.len());
    let g = multiset(gold);
    let p = multiset(pred);
    let tp = g.iter().map(|(k, &n)| n.min(p.get(k).copied().unwrap_or(0))).sum();
    MatchCounts {
        true_positive: tp,
        predicted_total: p_total,
        gold_total: g_total,
    }
}

fn same_sentence(gold: &ExtractionRecord, pred: &ExtractionRecord) -> Result<()> {
    if gold.sentence_id != pred.sentence_id {
        return Err(Error::InvalidInput(format!(
            "comparing sentence `{}` with prediction for `{}`",
            gold.sentence_id, pred.sentence_id
        )));
    }
    Ok(())
}

/// Normalized entity surfaces of a record.
pub fn entity_keys(record: &ExtractionRecord) -> Vec<String> {
    record.entities.iter().map(|e| normalize_ws(&e.surface)).collect()
}

/// `(head, type, tail)` surface triples; symmetric types put the
/// lexicographically smaller surface first.
pub fn relation_keys(record: &ExtractionRecord) -> Vec<(String, RelationType, String)> {
    record
        .relations
        .iter()
        .map(|r| {
            let (mut h, mut t) = (normalize_ws(&r.head.surface), normalize_ws(&r.tail.surface));
            if r.relation.is_symmetric() && t < h {
                std::mem::swap(&mut h, &mut t);
            }
            (h, r.relation, t)
        })
        .collect()
}

pub fn match_entities(gold: &ExtractionRecord, pred: &ExtractionRecord) -> Result<MatchCounts> {
    same_sentence(gold, pred)?;
    Ok(intersect(entity_keys(gold), entity_keys(pred)))
}

pub fn match_relations(gold: &ExtractionRecord, pred: &ExtractionRecord) -> Result<MatchCounts> {
    same_sentence(gold, pred)?;
    Ok(intersect(relation_keys(gold), relation_keys(pred)))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeScore {
    pub counts: MatchCounts,
    pub scores: Prf,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub entity: Prf,
    pub relation: Prf,
    pub entity_counts: MatchCounts,
    pub relation_counts: MatchCounts,
    /// Keyed by relation type name.
    pub per_relation_type: BTreeMap<String, TypeScore>,
    pub sentences: usize,
}

/// Micro-averaged scores; gold sentences without a prediction count as
/// empty predictions.
pub fn evaluate_dataset(gold: &Dataset, predictions: &[ExtractionRecord]) -> Result<MetricReport> {
    let mut by_id: HashMap<&str, &ExtractionRecord> = HashMap::new();
    let known: HashSet<&str> = gold.examples.iter().map(|e| e.id()).collect();
    for p in predictions {
        if !known.contains(p.sentence_id.as_str()) {
            return Err(Error::InvalidInput(format!("prediction for unknown sentence `{}`", p.sentence_id)));
        }
        if by_id.insert(&p.sentence_id, p).is_some() {
            return Err(Error::InvalidInput(format!("two predictions for sentence `{}`", p.sentence_id)));
        }
    }
    let mut report = MetricReport::default();
    let mut per_type: BTreeMap<RelationType, MatchCounts> = RelationType::ALL.iter().map(|&r| (r, MatchCounts::default())).collect();
    for example in &gold.examples {
        let empty = ExtractionRecord::new(example.id());
        let pred = by_id.get(example.id()).copied().unwrap_or(&empty);
        report.entity_counts.add(match_entities(&example.record, pred)?);
        report.relation_counts.add(match_relations(&example.record, pred)?);
        let g = relation_keys(&example.record);
        let p = relation_keys(pred);
        for (r, counts) in per_type.iter_mut() {
            let keep = |v: &Vec<(String, RelationType, String)>| v.iter().filter(|k| k.1 == *r).cloned().collect::<Vec<_>>();
            counts.add(intersect(keep(&g), keep(&p)));
        }
    }
    report.entity = prf(report.entity_counts);
    report.relation = prf(report.relation_counts);
    report.per_relation_type = per_type
        .into_iter()
        .map(|(r, counts)| (r.name().to_string(), TypeScore { counts, scores: prf(counts) }))
        .collect();
    report.sentences = gold.len();
    Ok(report)
}

/// Plain-text table of P/R/F1 (×100, two decimals) for entities and
/// relations, one row per labelled report.
pub fn format_table(rows: &[(String, MetricReport)]) -> String {
    let width = rows.iter().map(|(l, _)| l.chars().count()).max().unwrap_or(0).max("Setting".len());
    let mut out = format!(
        "{:<width$} | {:>7} {:>7} {:>7} | {:>7} {:>7} {:>7}\n",
        "Setting", "Ent-P", "Ent-R", "Ent-F1", "Rel-P", "Rel-R", "Rel-F1"
    );
    out.push_str(&format!("{}\n", "-".repeat(width + 52)));
    for (label, r) in rows {
        out.push_str(&format!(
            "{:<width$} | {:>7.2} {:>7.2} {:>7.2} | {:>7.2} {:>7.2} {:>7.2}\n",
            label,
            r.entity.precision * 100.0,
            r.entity.recall * 100.0,
            r.entity.f1 * 100.0,
            r.relation.precision * 100.0,
            r.relation.recall * 100.0,
            r.relation.f1 * 100.0,
        ));
    }
    out
}

/// Element-wise mean of reports (counts summed).
pub fn mean_report(reports: &[MetricReport]) -> MetricReport {
    let mut out = MetricReport::default();
    if reports.is_empty() {
        return out;
    }
    let n = reports.len() as f64;
    let avg = |f: &dyn Fn(&MetricReport) -> Prf| {
        let (p, r, f1) = reports.iter().map(f).fold((0.0, 0.0, 0.0), |a, x| (a.0 + x.precision, a.1 + x.recall, a.2 + x.f1));
        Prf {
            precision: p / n,
            recall: r / n,
            f1: f1 / n,
        }
    };
    out.entity = avg(&|r| r.entity);
    out.relation = avg(&|r| r.relation);
    for r in reports {
        out.entity_counts.add(r.entity_counts);
        out.relation_counts.add(r.relation_counts);
        out.sentences += r.sentences;
        for (k, v) in &r.per_relation_type {
            out.per_relation_type.entry(k.clone()).or_default().counts.add(v.counts);
        }
    }
    for v in out.per_relation_type.values_mut() {
        v.scores = prf(v.counts);
    }
    out
}
