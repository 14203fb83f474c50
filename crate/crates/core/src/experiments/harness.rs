use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use super::{kshot_sample, package_split, bucket_stats, ExperimentConfig, PackageStats, DEFAULT_PACKAGES};
use crate::annotations::{Dataset, Example};
use crate::classifier::{train_classifier, ClassifierConfig, KeywordClassifier, RelationClassifier};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::eval::{evaluate_dataset, format_table, mean_report, MetricReport};
use crate::extractor::{
    merge_records, train_extractor, write_predictions, Extraction, FinetuneConfig, FinetuneReport, Pipeline, PromptMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Rq {
    Rq1,
    Rq2,
    Rq3,
    Rq4,
    Rq5,
}

impl fmt::Display for Rq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = *self as usize + 1;
        write!(f, "rq{n}")
    }
}

impl FromStr for Rq {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_lowercase().as_str() {
            "rq1" => Ok(Rq::Rq1),
            "rq2" => Ok(Rq::Rq2),
            "rq3" => Ok(Rq::Rq3),
            "rq4" => Ok(Rq::Rq4),
            "rq5" => Ok(Rq::Rq5),
            other => Err(Error::Config(format!("unknown research question `{other}`"))),
        }
    }
}

/// Where dynamic prompts get their relation classifier.
#[derive(Clone)]
pub enum ClassifierSource {
    Keyword,
    /// Trained per run on that run's training examples with relations.
    Encoder(ClassifierConfig),
    Fixed(Arc<dyn RelationClassifier>),
}

impl fmt::Debug for ClassifierSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl ClassifierSource {
    pub fn describe(&self) -> String {
        match self {
            ClassifierSource::Keyword => "keyword".into(),
            ClassifierSource::Encoder(c) => format!(
                "encoder:{} lr={} epochs={} batch={} seed={}",
                c.encoder_name, c.learning_rate, c.epochs, c.batch_size, c.seed
            ),
            ClassifierSource::Fixed(_) => "fixed".into(),
        }
    }

    fn resolve(&self, train: &Dataset) -> Result<Arc<dyn RelationClassifier>> {
        match self {
            ClassifierSource::Keyword => Ok(Arc::new(KeywordClassifier::default())),
            ClassifierSource::Encoder(c) => Ok(Arc::new(train_classifier(&train.with_relations(), c)?)),
            ClassifierSource::Fixed(c) => Ok(Arc::clone(c)),
        }
    }
}

/// Datasets a harness may draw on. The initial training set defaults to
/// the unmutated part of the final one.
#[derive(Debug, Clone, Default)]
pub struct ExperimentData {
    pub initial_train: Option<Dataset>,
    pub final_train: Option<Dataset>,
    pub final_test: Option<Dataset>,
}

impl ExperimentData {
    fn require<'a>(d: &'a Option<Dataset>, what: &str) -> Result<&'a Dataset> {
        match d {
            Some(d) if !d.is_empty() => Ok(d),
            Some(_) => Err(Error::InvalidInput(format!("{what} is empty"))),
            None => Err(Error::InvalidInput(format!("{what} is missing"))),
        }
    }

    fn final_train(&self) -> Result<&Dataset> {
        Self::require(&self.final_train, "final training set")
    }

    fn final_test(&self) -> Result<&Dataset> {
        Self::require(&self.final_test, "final test set")
    }

    fn initial_train(&self) -> Result<Dataset> {
        if let Some(d) = &self.initial_train {
            return Self::require(&self.initial_train, "initial training set").map(|_| d.clone());
        }
        let d = self.final_train()?.originals();
        Self::require(&Some(d), "initial training set").cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub sentences: usize,
    pub fingerprint: String,
}

impl DatasetInfo {
    fn of(d: &Dataset) -> Self {
        DatasetInfo {
            name: d.name.clone(),
            sentences: d.len(),
            fingerprint: d.fingerprint(),
        }
    }
}

/// Everything needed to rerun one training/evaluation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub rq: Rq,
    pub run: String,
    pub row: String,
    pub prompt_mode: String,
    pub seed: u64,
    pub experiment: ExperimentConfig,
    pub finetune: FinetuneConfig,
    pub classifier: String,
    pub train: DatasetInfo,
    pub test: DatasetInfo,
    pub finetune_reports: Vec<FinetuneReport>,
    pub off_candidate_relations: usize,
    pub decode_diagnostics: usize,
    pub extra: BTreeMap<String, String>,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: String,
    pub row: String,
    pub report: MetricReport,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RqResult {
    pub rq: Rq,
    /// One entry per table row; repeated runs of a row are averaged.
    pub rows: Vec<(String, MetricReport)>,
    pub runs: Vec<RunResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub packages: Vec<PackageStats>,
}

impl RqResult {
    pub fn table(&self) -> String {
        format_table(&self.rows)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    Joint(PromptMode),
    /// Entity-only and relation-only extractors, merged.
    SingleTask(usize),
}

impl Variant {
    fn needs_classifier(self) -> bool {
        match self {
            Variant::Joint(m) => m.needs_classifier(),
            Variant::SingleTask(_) => true,
        }
    }

    fn describe(self) -> String {
        match self {
            Variant::Joint(m) => m.to_string(),
            Variant::SingleTask(n) => format!("{} + {}", PromptMode::EntityOnly, PromptMode::RelationOnly(n)),
        }
    }
}

#[derive(Debug, Clone)]
struct RunSpec {
    run: String,
    row: String,
    variant: Variant,
    backbone: String,
    seed: u64,
    train: Dataset,
    test: Dataset,
    extra: BTreeMap<String, String>,
}

/// Runs the research-question protocols and writes per-run manifests and
/// predictions under `out_dir/<rq>/<run>/`.
#[derive(Debug, Clone)]
pub struct Harness {
    pub config: ExperimentConfig,
    pub finetune: FinetuneConfig,
    pub classifier: ClassifierSource,
    pub out_dir: PathBuf,
}

fn slug(s: &str) -> String {
    let mut out = String::new();
    for c in s.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('-') {
            out.push('-');
        }
    }
    out.trim_matches('-').to_string()
}

fn family(e: &Example) -> &str {
    e.sentence.parent_id.as_deref().unwrap_or(e.id())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Backend(e.to_string()))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

impl Harness {
    fn spec(&self, run: &str, row: &str, variant: Variant, train: &Dataset, test: &Dataset) -> RunSpec {
        RunSpec {
            run: run.to_string(),
            row: row.to_string(),
            variant,
            backbone: self.config.backbone_name.clone(),
            seed: self.config.seed,
            train: train.clone(),
            test: test.clone(),
            extra: BTreeMap::new(),
        }
    }

    fn train_set(&self, data: &ExperimentData) -> Result<Dataset> {
        if self.config.augmentation {
            data.final_train().cloned()
        } else {
            data.initial_train()
        }
    }

    fn packages(&self) -> Vec<String> {
        self.config
            .package_filter
            .clone()
            .unwrap_or_else(|| DEFAULT_PACKAGES.iter().map(|s| s.to_string()).collect())
    }

    /// Every run of the protocol; fails before any training when an input
    /// is missing or unusable.
    fn plan(&self, rq: Rq, data: &ExperimentData) -> Result<(Vec<RunSpec>, Vec<PackageStats>)> {
        self.config.validate()?;
        self.finetune.validate()?;
        let joint = Variant::Joint(self.config.prompt_mode);
        let n = self.config.top_n();
        let mut packages = Vec::new();
        let specs = match rq {
            Rq::Rq1 => {
                let test = data.final_test()?;
                vec![
                    self.spec("without-augmentation", "without augmentation", joint, &data.initial_train()?, test),
                    self.spec("with-augmentation", "with augmentation", joint, data.final_train()?, test),
                ]
            }
            Rq::Rq2 => {
                let (train, test) = (self.train_set(data)?, data.final_test()?);
                (1..=6)
                    .map(|n| {
                        let label = format!("N={n}");
                        self.spec(&slug(&label), &label, Variant::Joint(PromptMode::Dynamic(n)), &train, test)
                    })
                    .collect()
            }
            Rq::Rq3 => {
                let (train, test) = (self.train_set(data)?, data.final_test()?);
                let mut small = self.spec("small-backbone", "small backbone", joint, &train, test);
                small.backbone = self.config.small_backbone_name.clone();
                vec![
                    self.spec("joint", "joint", joint, &train, test),
                    self.spec("static-prompt", "static prompt", Variant::Joint(PromptMode::Static), &train, test),
                    self.spec("single-task", "single task", Variant::SingleTask(n), &train, test),
                    small,
                ]
            }
            Rq::Rq4 => {
                let pool = Dataset::union("rq4-pool", [data.final_train()?, data.final_test()?]);
                let names = self.packages();
                let buckets = package_split(&pool, &names);
                packages = bucket_stats(&buckets);
                let mut specs = Vec::new();
                for p in &names {
                    let train = &buckets[p];
                    if train.is_empty() {
                        return Err(Error::InvalidInput(format!("package bucket `{p}` is empty")));
                    }
                    let seen: HashSet<&str> = train.examples.iter().map(family).collect();
                    let others = Dataset::union(
                        format!("{}[not {p}]", pool.name),
                        names.iter().filter(|q| *q != p).map(|q| &buckets[q]),
                    );
                    let test = others.filtered(others.name.clone(), |e| !seen.contains(family(e)));
                    if test.is_empty() {
                        return Err(Error::InvalidInput(format!("no held-out sentences for package `{p}`")));
                    }
                    let label = format!("train on {p}");
                    specs.push(self.spec(&slug(&label), &label, joint, train, &test));
                }
                specs
            }
            Rq::Rq5 => {
                let (pool, test) = (data.final_train()?, data.final_test()?);
                let mut specs = Vec::new();
                for k in self.config.kshots() {
                    for r in 0..self.config.repeats {
                        let seed = self.config.seed + r as u64;
                        let sample = kshot_sample(pool, k, seed)?;
                        let mut spec = self.spec(&format!("k{k}-r{r}"), &format!("K={k}"), joint, &sample.dataset, test);
                        spec.seed = seed;
                        spec.extra.insert("k".into(), k.to_string());
                        spec.extra.insert("repeat".into(), r.to_string());
                        specs.push(spec);
                    }
                }
                specs
            }
        };
        Ok((specs, packages))
    }

    pub fn run(&self, rq: Rq, data: &ExperimentData) -> Result<RqResult> {
        let (specs, packages) = self.plan(rq, data)?;
        let dir = self.out_dir.join(rq.to_string());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        log::info!("{rq}: {} runs", specs.len());
        let runs: Vec<RunResult> = specs.par_iter().map(|s| self.execute(rq, s, &dir)).collect::<Result<_>>()?;

        let mut rows: Vec<(String, Vec<&RunResult>)> = Vec::new();
        for r in &runs {
            match rows.iter_mut().find(|(label, _)| *label == r.row) {
                Some((_, members)) => members.push(r),
                None => rows.push((r.row.clone(), vec![r])),
            }
        }
        let rows = rows
            .into_iter()
            .map(|(label, members)| {
                let report = if members.len() == 1 {
                    members[0].report.clone()
                } else {
                    mean_report(&members.iter().map(|m| m.report.clone()).collect::<Vec<_>>())
                };
                (label, report)
            })
            .collect();
        let result = RqResult {
            rq,
            rows,
            runs,
            packages,
        };
        write_json(&dir.join("results.json"), &result)?;
        let table = dir.join("table.txt");
        fs::write(&table, result.table()).map_err(|e| Error::io(&table, e))?;
        Ok(result)
    }

    fn execute(&self, rq: Rq, spec: &RunSpec, rq_dir: &Path) -> Result<RunResult> {
        let classifier = if spec.variant.needs_classifier() {
            Some(self.classifier.resolve(&spec.train)?)
        } else {
            None
        };
        let clf = classifier.as_deref();
        let finetune = FinetuneConfig {
            backbone_name: spec.backbone.clone(),
            seed: spec.seed,
            ..self.finetune.clone()
        };
        let sentences: Vec<Sentence> = spec.test.examples.iter().map(|e| e.sentence.clone()).collect();
        let run_one = |mode: PromptMode| -> Result<(Vec<Extraction>, FinetuneReport)> {
            let (adapter, report) = train_extractor(&spec.train, mode, clf, &finetune)?;
            let pipeline = Pipeline {
                adapter: adapter.as_ref(),
                classifier: clf,
                mode,
            };
            Ok((pipeline.extract_all(&sentences)?, report))
        };
        let (extractions, finetune_reports) = match spec.variant {
            Variant::Joint(mode) => {
                let (x, r) = run_one(mode)?;
                (x, vec![r])
            }
            Variant::SingleTask(n) => {
                let (ents, re) = run_one(PromptMode::EntityOnly)?;
                let (rels, rr) = run_one(PromptMode::RelationOnly(n))?;
                let merged = ents
                    .into_iter()
                    .zip(rels)
                    .map(|(e, r)| Extraction {
                        record: merge_records(&e.record, &r.record),
                        prompt: format!("{}\n{}", e.prompt, r.prompt),
                        sel: format!("{}\n{}", e.sel, r.sel),
                        diagnostics: e.diagnostics.into_iter().chain(r.diagnostics).collect(),
                        off_candidate_relations: r.off_candidate_relations,
                    })
                    .collect();
                (merged, vec![re, rr])
            }
        };
        let records: Vec<_> = extractions.iter().map(|x| x.record.clone()).collect();
        let report = evaluate_dataset(&spec.test, &records)?;

        let dir = rq_dir.join(&spec.run);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_predictions(&extractions, &dir.join("predictions.jsonl"))?;
        let manifest = Manifest {
            rq,
            run: spec.run.clone(),
            row: spec.row.clone(),
            prompt_mode: spec.variant.describe(),
            seed: spec.seed,
            experiment: self.config.clone(),
            finetune,
            classifier: if clf.is_some() { self.classifier.describe() } else { "none".into() },
            train: DatasetInfo::of(&spec.train),
            test: DatasetInfo::of(&spec.test),
            finetune_reports,
            off_candidate_relations: extractions.iter().map(|x| x.off_candidate_relations).sum(),
            decode_diagnostics: extractions.iter().map(|x| x.diagnostics.len()).sum(),
            extra: spec.extra.clone(),
            report: report.clone(),
        };
        let path = dir.join("manifest.json");
        write_json(&path, &manifest)?;
        log::info!(
            "{rq}/{}: entity F1 {:.4}, relation F1 {:.4}",
            spec.run,
            report.entity.f1,
            report.relation.f1
        );
        Ok(RunResult {
            run: spec.run.clone(),
            row: spec.row.clone(),
            report,
            manifest: path,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::super::kshot::tests::balanced_pool;
    use super::*;
    use crate::corpus::Split;

    fn harness(out: &Path) -> Harness {
        Harness {
            config: ExperimentConfig {
                backbone_name: "stub".into(),
                small_backbone_name: "stub".into(),
                repeats: 2,
                kshot: Some(1),
                ..ExperimentConfig::default()
            },
            finetune: FinetuneConfig {
                epochs: 1,
                backbone_name: "stub".into(),
                ..FinetuneConfig::default()
            },
            classifier: ClassifierSource::Keyword,
            out_dir: out.to_path_buf(),
        }
    }

    fn data() -> ExperimentData {
        let mut pool = balanced_pool(4);
        for (i, e) in pool.examples.iter_mut().enumerate() {
            e.sentence.tags = vec![["io", "util", "swing"][i % 3].to_string()];
        }
        let (mut train, mut test) = (pool.clone(), pool);
        train.examples.iter_mut().for_each(|e| e.sentence.split = Split::Train);
        test.examples.iter_mut().for_each(|e| {
            e.sentence.split = Split::Test;
            e.sentence.sentence_id.push_str("-t");
            e.record.sentence_id.push_str("-t");
        });
        ExperimentData {
            initial_train: None,
            final_train: Some(train),
            final_test: Some(test),
        }
    }

    #[test]
    fn row_counts_and_manifests() {
        let dir = tempfile::tempdir().unwrap();
        let h = harness(dir.path());
        let d = data();
        let expected = [(Rq::Rq1, 2, 2), (Rq::Rq2, 6, 6), (Rq::Rq3, 4, 4), (Rq::Rq4, 3, 3), (Rq::Rq5, 1, 2)];
        for (rq, rows, runs) in expected {
            let r = h.run(rq, &d).unwrap();
            assert_eq!(r.rows.len(), rows, "{rq}");
            assert_eq!(r.runs.len(), runs, "{rq}");
            for run in &r.runs {
                let m: Manifest = serde_json::from_str(&fs::read_to_string(&run.manifest).unwrap()).unwrap();
                assert_eq!(m.report, run.report);
                assert_eq!(m.train.fingerprint.len(), 64);
            }
            assert!(dir.path().join(rq.to_string()).join("table.txt").is_file());
        }
    }

    #[test]
    fn stub_on_train_equals_test_is_perfect() {
        let dir = tempfile::tempdir().unwrap();
        let h = harness(dir.path());
        let mut d = data();
        let train = d.final_train.clone().unwrap();
        d.final_test = Some(train);
        let r = h.run(Rq::Rq3, &d).unwrap();
        for (label, report) in &r.rows {
            assert!((report.entity.f1 - 1.0).abs() < 1e-12, "{label}");
            assert!((report.relation.f1 - 1.0).abs() < 1e-12, "{label}");
        }
    }

    #[test]
    fn missing_components_fail_before_training() {
        let dir = tempfile::tempdir().unwrap();
        let h = harness(dir.path());
        let d = ExperimentData {
            final_test: None,
            ..data()
        };
        assert!(h.run(Rq::Rq2, &d).is_err());
        assert!(!dir.path().join("rq2").exists());
        let mut bad = h.clone();
        bad.config.package_filter = Some(vec!["java.sql".into()]);
        assert!(bad.run(Rq::Rq4, &data()).is_err());
        assert!("rq9".parse::<Rq>().is_err());
    }

    #[test]
    fn rq5_rows_average_repeats() {
        let dir = tempfile::tempdir().unwrap();
        let mut h = harness(dir.path());
        h.config.repeats = 3;
        let r = h.run(Rq::Rq5, &data()).unwrap();
        assert_eq!(r.runs.len(), 3);
        let mean = r.runs.iter().map(|x| x.report.entity.f1).sum::<f64>() / 3.0;
        assert!((r.rows[0].1.entity.f1 - mean).abs() < 1e-12);
        assert_eq!(slug("train on java.io"), "train-on-java-io");
    }
}
