//! Acceptance gate: one PASS/FAIL line per criterion on stderr, then a single
//! assert.
//!
//! Tolerances and budgets are pinned in the constants below.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use apirel::annotations::{check_split_hygiene, load_gold};
use apirel::augment::{augment_dataset, AugmentOptions, HeuristicParser, SynonymSource};
use apirel::candidate::{judge_token, load_inventory, CandidateReason};
use apirel::classifier::{relation_loss, FixedClassifier};
use apirel::eval::{entity_keys, evaluate_dataset, match_entities, match_relations, relation_keys};
use apirel::experiments::{kshot_sample, ClassifierSource, ExperimentConfig, ExperimentData, Harness, Manifest, Rq, ENTITY_ONLY_CLASS};
use apirel::extractor::{
    build_training_corpus, train_extractor, FinetuneConfig, GenerationConfig, Pipeline, PromptMode, Seq2SeqAdapter,
    TransformerAdapter,
};
use apirel::prompt::build_dynamic_prompt;
use apirel::sel::{decode_sel, decode_sel_text, encode_sel};
use apirel::{Dataset, EntityMention, Example, ExtractionRecord, Origin, Prompt, RelationInstance, RelationType, Sentence};

const ROUND_TRIP_CASES: usize = 10_000;
const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(10);
const FUZZ_CASES: usize = 10_000;
const FUZZ_BUDGET: Duration = Duration::from_secs(10);
const ORACLE_CASES: usize = 1_000;
const ORACLE_BUDGET: Duration = Duration::from_secs(30);
const SOFTMAX_CASES: usize = 1_000;
const SOFTMAX_TOL: f64 = 1e-6;
const SEQ_PAIRS: usize = 10;
const SEQ_TOL: f64 = 1e-4;
const OVERFIT_MAX_EPOCHS: usize = 50;
const OVERFIT_ENTITY_F1: f64 = 0.95;
const OVERFIT_RELATION_F1: f64 = 0.90;
const OVERFIT_BUDGET: Duration = Duration::from_secs(15 * 60);
const KSHOTS: [usize; 3] = [1, 5, 10];

const REFERENCE_PROMPT: &str =
    "[spot] API [asso] function replace [asso] efficiency comparison [text] You better using getint() instead of get()";

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(budget: Duration, start: Instant) -> Result<Duration, String> {
    let spent = start.elapsed();
    ensure(spent <= budget, || format!("took {spent:.2?}, budget {budget:?}"))?;
    Ok(spent)
}

/// A sentence made of API surfaces and filler words; every occurrence of
/// each surface is annotated and relations join surfaces that occur once.
fn random_record(rng: &mut impl Rng, id: &str) -> (Sentence, ExtractionRecord) {
    const FILLER: [&str; 7] = ["uses", "then", "is", "not", "and", "or", "but"];
    let mut text = String::new();
    let mut entities = Vec::new();
    for _ in 0..rng.gen_range(0..7) {
        let mut s = String::new();
        s.push(rng.gen_range(b'A'..=b'Z') as char);
        for _ in 0..rng.gen_range(1..6) {
            s.push(rng.gen_range(b'a'..=b'z') as char);
        }
        if rng.gen_bool(0.4) {
            s.push('.');
            for _ in 0..rng.gen_range(1..5) {
                s.push(rng.gen_range(b'a'..=b'z') as char);
            }
        }
        match rng.gen_range(0..3) {
            0 => s.push_str("()"),
            1 => s.push_str("(int)"),
            _ => {}
        }
        if !text.is_empty() {
            text.push(' ');
        }
        let start = text.chars().count();
        text.push_str(&s);
        entities.push(EntityMention::new(s.clone(), start, start + s.chars().count()));
        text.push(' ');
        text.push_str(FILLER[rng.gen_range(0..FILLER.len())]);
    }
    if text.is_empty() {
        text.push_str("nothing here");
    }
    let mut record = ExtractionRecord::new(id);
    let unique: Vec<&EntityMention> = entities
        .iter()
        .filter(|e| entities.iter().filter(|o| o.surface == e.surface).count() == 1)
        .collect();
    if unique.len() >= 2 {
        for _ in 0..rng.gen_range(0..6) {
            let (h, t) = (rng.gen_range(0..unique.len()), rng.gen_range(0..unique.len()));
            if h != t {
                let r = RelationType::ALL[rng.gen_range(0..RelationType::COUNT)];
                record.relations.push(RelationInstance::new(unique[h].clone(), r, unique[t].clone()));
            }
        }
    }
    record.entities = entities;
    (Sentence::from_text(id, text), record.normalized())
}

fn sel_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let start = Instant::now();
    for i in 0..ROUND_TRIP_CASES {
        let (sentence, record) = random_record(&mut rng, &format!("r{i}"));
        let text = encode_sel(&record);
        let decoded = decode_sel(&text, &sentence);
        ensure(decoded.diagnostics.is_empty(), || format!("case {i}: {:?} on {text}", decoded.diagnostics))?;
        ensure(decoded.record == record, || format!("case {i}: {text} decoded to {:?}", decoded.record))?;
    }
    let spent = within(ROUND_TRIP_BUDGET, start)?;
    Ok(format!("{ROUND_TRIP_CASES} records in {spent:.2?}"))
}

fn parse_totality() -> Check {
    const PIECES: [&str; 12] = ["(", ")", "(", ")", ":", " ", "API", "function replace", "x()", "a.b", "\\", "\u{1F600}"];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let start = Instant::now();
    let mut with_diagnostics = 0;
    for i in 0..FUZZ_CASES {
        let input = if i % 2 == 0 {
            let bytes: Vec<u8> = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect();
            String::from_utf8_lossy(&bytes).into_owned()
        } else {
            (0..rng.gen_range(0..40)).map(|_| PIECES[rng.gen_range(0..PIECES.len())]).collect()
        };
        let result = catch_unwind(|| decode_sel_text(&input, "f", "x() and a.b use API"));
        match result {
            Ok(d) => with_diagnostics += usize::from(!d.diagnostics.is_empty()),
            Err(_) => return Err(format!("panic on {input:?}")),
        }
    }
    let spent = within(FUZZ_BUDGET, start)?;
    Ok(format!("{FUZZ_CASES} inputs in {spent:.2?}, {with_diagnostics} with diagnostics"))
}

fn prompt_exact() -> Check {
    let text = "You better using getint() instead of get()";
    let direct = Prompt::new(vec![RelationType::FunctionReplace, RelationType::EfficiencyComparison], text).render();
    ensure(direct == REFERENCE_PROMPT, || format!("rendered {direct:?}"))?;
    let mut logits = [0.0; RelationType::COUNT];
    logits[RelationType::FunctionReplace.index()] = 3.0;
    logits[RelationType::EfficiencyComparison.index()] = 2.0;
    let dynamic = build_dynamic_prompt(text, &FixedClassifier::new(logits), 2).map_err(|e| e.to_string())?;
    ensure(dynamic.render() == REFERENCE_PROMPT, || format!("dynamic rendered {:?}", dynamic.render()))?;
    Ok("direct and classifier-driven renderings equal".into())
}

/// Largest number of pred→gold pairs with equal keys over every injective
/// assignment.
fn brute_force_tp<K: PartialEq>(gold: &[K], pred: &[K]) -> usize {
    fn go<K: PartialEq>(gold: &[K], pred: &[K], used: &mut Vec<bool>) -> usize {
        let Some((p, rest)) = pred.split_first() else {
            return 0;
        };
        let mut best = go(gold, rest, used);
        for g in 0..gold.len() {
            if !used[g] && gold[g] == *p {
                used[g] = true;
                best = best.max(1 + go(gold, rest, used));
                used[g] = false;
            }
        }
        best
    }
    go(gold, pred, &mut vec![false; gold.len()])
}

fn small_record(rng: &mut impl Rng) -> ExtractionRecord {
    const SURFACES: [&str; 4] = ["a()", "b", "c.d", "a()  "];
    let mut r = ExtractionRecord::new("m");
    for _ in 0..rng.gen_range(0..6) {
        let s = SURFACES[rng.gen_range(0..SURFACES.len())];
        r.entities.push(EntityMention::unresolved(s));
    }
    for _ in 0..rng.gen_range(0..6) {
        let h = EntityMention::unresolved(SURFACES[rng.gen_range(0..SURFACES.len())]);
        let t = EntityMention::unresolved(SURFACES[rng.gen_range(0..SURFACES.len())]);
        let ty = RelationType::ALL[rng.gen_range(0..3) * 2];
        r.relations.push(RelationInstance::new(h, ty, t));
    }
    r
}

fn metric_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut nonzero = 0;
    for i in 0..ORACLE_CASES {
        let (gold, pred) = (small_record(&mut rng), small_record(&mut rng));
        let e = match_entities(&gold, &pred).map_err(|e| e.to_string())?;
        let r = match_relations(&gold, &pred).map_err(|e| e.to_string())?;
        let (be, br) = (
            brute_force_tp(&entity_keys(&gold), &entity_keys(&pred)),
            brute_force_tp(&relation_keys(&gold), &relation_keys(&pred)),
        );
        ensure(e.true_positive == be, || format!("case {i}: entity {} vs {be}", e.true_positive))?;
        ensure(r.true_positive == br, || format!("case {i}: relation {} vs {br}", r.true_positive))?;
        ensure(e.gold_total == gold.entities.len() && e.predicted_total == pred.entities.len(), || {
            format!("case {i}: entity totals")
        })?;
        nonzero += usize::from(be + br > 0);
    }
    let spent = within(ORACLE_BUDGET, start)?;
    Ok(format!("{ORACLE_CASES} pairs ({nonzero} with matches) in {spent:.2?}"))
}

fn loss_identities() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..SOFTMAX_CASES {
        let z: Vec<f64> = (0..RelationType::COUNT).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let c = rng.gen_range(0..RelationType::COUNT);
        let denom: f64 = z.iter().map(|v| v.exp()).sum();
        let naive = -(z[c].exp() / denom).ln();
        worst = worst.max((relation_loss(&z, c) - naive).abs());
    }
    ensure(worst <= SOFTMAX_TOL, || format!("classification loss off by {worst:e}"))?;

    let gold = load_gold(&fixture("overfit20.jsonl")).map_err(|e| e.to_string())?;
    let pairs = build_training_corpus(&gold, PromptMode::Static, None).map_err(|e| e.to_string())?;
    let mut adapter = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).map_err(|e| e.to_string())?;
    let cfg = FinetuneConfig {
        epochs: 1,
        learning_rate: 1e-3,
        backbone_name: "seq2seq-tiny".into(),
        ..FinetuneConfig::default()
    };
    adapter.finetune(&pairs, &cfg).map_err(|e| e.to_string())?;
    let mut seq_worst: f64 = 0.0;
    for pair in pairs.iter().take(SEQ_PAIRS) {
        let forced = adapter.pair_loss(pair).map_err(|e| e.to_string())?;
        let summed = adapter.stepwise_negative_log_likelihood(pair).map_err(|e| e.to_string())?;
        seq_worst = seq_worst.max((forced - summed).abs());
    }
    ensure(seq_worst <= SEQ_TOL, || format!("sequence loss off by {seq_worst:e}"))?;
    Ok(format!("classification max err {worst:.1e}, sequence max err {seq_worst:.1e} over {SEQ_PAIRS} pairs"))
}

fn augmentation_properties() -> Check {
    let gold = load_gold(&fixture("gold50.jsonl")).map_err(|e| e.to_string())?;
    ensure(gold.len() == 50, || format!("fixture has {} sentences", gold.len()))?;
    let synonyms = SynonymSource::load(&fixture("synonyms.jsonl")).map_err(|e| e.to_string())?;
    let parser = HeuristicParser::with_lexicon(synonyms.lemmas());
    let (aug, report) = augment_dataset(&gold, &synonyms, &parser, AugmentOptions::default());
    let parents: HashMap<&str, &Example> = gold.examples.iter().map(|e| (e.id(), e)).collect();
    let mut mutants = 0;
    for m in aug.examples.iter().filter(|e| e.sentence.origin != Origin::Original) {
        mutants += 1;
        let pid = m.sentence.parent_id.as_deref().ok_or_else(|| format!("{} has no parent", m.id()))?;
        let p = parents.get(pid).ok_or_else(|| format!("{} has unknown parent {pid}", m.id()))?;
        m.record.validate(&m.sentence.text).map_err(|e| format!("{}: {e}", m.id()))?;
        ensure(m.record.entities.len() == p.record.entities.len(), || format!("{}: entity count changed", m.id()))?;
        let types = |r: &ExtractionRecord| {
            let mut t: Vec<RelationType> = r.relations.iter().map(|x| x.relation).collect();
            t.sort();
            t
        };
        ensure(types(&m.record) == types(&p.record), || format!("{}: relation labels changed", m.id()))?;
        ensure(m.sentence.split == p.sentence.split, || format!("{}: split differs from parent", m.id()))?;
    }
    let violations = check_split_hygiene(&aug);
    ensure(violations.is_empty(), || format!("hygiene: {}", violations[0]))?;
    let texts: Vec<&str> = aug.examples.iter().map(|e| e.sentence.text.as_str()).collect();
    for needle in [
        "Call remove() instead of list.remove() while iterating.",
        "Call remove instead of list.remove() while iterating.",
        "nextline() will load the entire line, but next() will only read the next word.",
    ] {
        ensure(texts.contains(&needle), || format!("missing mutant {needle:?}"))?;
    }
    Ok(format!(
        "{mutants} mutants ({} morphology, {} verb), growth {:.2}",
        report.morph_mutants, report.verb_mutants, report.growth
    ))
}

fn filter_fixtures() -> Check {
    let inventory = load_inventory(&fixture("inventory.txt")).map_err(|e| e.to_string())?;
    let text = std::fs::read_to_string(fixture("filter_examples.txt")).map_err(|e| e.to_string())?;
    let sentences: Vec<Sentence> = text
        .lines()
        .enumerate()
        .map(|(i, l)| Sentence::from_text(format!("t{i}"), l))
        .collect();
    let verdict = |surface: &str| {
        sentences
            .iter()
            .flat_map(|s| &s.tokens)
            .find(|t| t.surface == surface)
            .map(|t| judge_token(t, &inventory))
    };
    let required = ["remove()", "l.remove()", "iterator.remove", "printWriter", "println", "nextline()", "StringBuffer", "StringBuilder"];
    for surface in required {
        let v = verdict(surface).ok_or_else(|| format!("no token `{surface}`"))?;
        ensure(v.is_candidate, || format!("`{surface}` not flagged"))?;
    }
    let print = sentences[3]
        .tokens
        .iter()
        .find(|t| t.surface == "print")
        .ok_or("no bare `print` token in the printWriter sentence")?;
    let v = judge_token(print, &inventory);
    ensure(
        !v.reasons.contains(&CandidateReason::HasParens) && !v.reasons.contains(&CandidateReason::HasDot),
        || format!("`print` flagged by form: {:?}", v.reasons),
    )?;
    // the fixture inventory lists println but not print
    ensure(!v.is_candidate, || format!("`print` flagged: {:?}", v.reasons))?;
    Ok(format!("{} API tokens flagged; bare `print` not flagged", required.len()))
}

fn overfit_smoke() -> Check {
    let gold = load_gold(&fixture("overfit20.jsonl")).map_err(|e| e.to_string())?;
    ensure(gold.len() == 20, || format!("fixture has {} sentences", gold.len()))?;
    let cfg = FinetuneConfig {
        epochs: OVERFIT_MAX_EPOCHS,
        batch_size: 2,
        learning_rate: 3e-3,
        warmup_fraction: 0.06,
        backbone_name: "seq2seq-tiny".into(),
        generation: GenerationConfig {
            max_input_len: 64,
            max_output_len: 64,
            beam_size: 1,
        },
        ..FinetuneConfig::default()
    };
    let start = Instant::now();
    let (adapter, report) = train_extractor(&gold, PromptMode::Static, None, &cfg).map_err(|e| e.to_string())?;
    let pipeline = Pipeline {
        adapter: adapter.as_ref(),
        classifier: None,
        mode: PromptMode::Static,
    };
    let sentences: Vec<Sentence> = gold.examples.iter().map(|e| e.sentence.clone()).collect();
    let records: Vec<ExtractionRecord> = pipeline
        .extract_all(&sentences)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|x| x.record)
        .collect();
    let metrics = evaluate_dataset(&gold, &records).map_err(|e| e.to_string())?;
    let spent = within(OVERFIT_BUDGET, start)?;
    let detail = format!(
        "entity F1 {:.4}, relation F1 {:.4} after {} epochs in {spent:.1?}",
        metrics.entity.f1,
        metrics.relation.f1,
        report.epoch_losses.len()
    );
    ensure(report.epoch_losses.len() <= OVERFIT_MAX_EPOCHS, || detail.clone())?;
    ensure(metrics.entity.f1 >= OVERFIT_ENTITY_F1 && metrics.relation.f1 >= OVERFIT_RELATION_F1, || detail.clone())?;
    Ok(detail)
}

/// `per_class` sentences for each relation type plus `per_class`
/// entity-only sentences, all distinct.
fn balanced_pool(per_class: usize) -> Dataset {
    let mut examples = Vec::new();
    for r in RelationType::ALL {
        for i in 0..per_class {
            let id = format!("{}-{i}", r.name().replace(' ', "_"));
            let (a, b) = (format!("a{i}()"), format!("b{i}()"));
            let text = format!("{a} {} {b}", r.name());
            let start = text.len() - b.len();
            let (ea, eb) = (EntityMention::new(a.clone(), 0, a.len()), EntityMention::new(b, start, text.len()));
            let mut rec = ExtractionRecord::new(id.clone());
            rec.entities = vec![ea.clone(), eb.clone()];
            rec.relations = vec![RelationInstance::new(ea, r, eb)];
            examples.push(Example::new(Sentence::from_text(id, text), rec.normalized()));
        }
    }
    for i in 0..per_class {
        let id = format!("entity-{i}");
        let mut rec = ExtractionRecord::new(id.clone());
        rec.entities = vec![EntityMention::new(format!("c{i}()"), 0, format!("c{i}()").len())];
        examples.push(Example::new(Sentence::from_text(id, format!("c{i}() alone")), rec));
    }
    Dataset::new("balanced", examples)
}

fn kshot_sampler() -> Check {
    let pool = balanced_pool(15);
    for k in KSHOTS {
        let a = kshot_sample(&pool, k, 11).map_err(|e| e.to_string())?;
        ensure(a.dataset.len() == 8 * k, || format!("k={k}: {} sentences", a.dataset.len()))?;
        for r in RelationType::ALL {
            ensure(a.class_count(r.name()) == k, || format!("k={k}: {} drawn for {}", a.class_count(r.name()), r.name()))?;
        }
        ensure(a.class_count(ENTITY_ONLY_CLASS) == k, || format!("k={k}: entity-only count"))?;
        let b = kshot_sample(&pool, k, 11).map_err(|e| e.to_string())?;
        ensure(a == b, || format!("k={k}: same seed gave different samples"))?;
    }
    Ok(format!("k in {KSHOTS:?} gives 8k sentences, k per class, seed-stable"))
}

fn rq_structure() -> Check {
    let gold = load_gold(&fixture("gold50.jsonl")).map_err(|e| e.to_string())?;
    let synonyms = SynonymSource::load(&fixture("synonyms.jsonl")).map_err(|e| e.to_string())?;
    let parser = HeuristicParser::with_lexicon(synonyms.lemmas());
    let (aug, _) = augment_dataset(&gold, &synonyms, &parser, AugmentOptions::default());
    let data = ExperimentData {
        initial_train: None,
        final_train: Some(aug.split(apirel::Split::Train)),
        final_test: Some(aug.split(apirel::Split::Test)),
    };
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let harness = Harness {
        config: ExperimentConfig {
            backbone_name: "stub".into(),
            small_backbone_name: "stub".into(),
            kshot: Some(1),
            repeats: 10,
            ..ExperimentConfig::default()
        },
        finetune: FinetuneConfig {
            epochs: 1,
            backbone_name: "stub".into(),
            ..FinetuneConfig::default()
        },
        classifier: ClassifierSource::Keyword,
        out_dir: out.path().to_path_buf(),
    };
    let mut summary = Vec::new();
    for (rq, rows, runs) in [(Rq::Rq1, 2, 2), (Rq::Rq2, 6, 6), (Rq::Rq3, 4, 4), (Rq::Rq4, 3, 3), (Rq::Rq5, 1, 10)] {
        let result = harness.run(rq, &data).map_err(|e| format!("{rq}: {e}"))?;
        ensure(result.rows.len() == rows, || format!("{rq}: {} rows", result.rows.len()))?;
        ensure(result.runs.len() == runs, || format!("{rq}: {} runs", result.runs.len()))?;
        let mut manifests = Vec::new();
        for run in &result.runs {
            let text = std::fs::read_to_string(&run.manifest).map_err(|e| format!("{rq}/{}: {e}", run.run))?;
            let m: Manifest = serde_json::from_str(&text).map_err(|e| format!("{rq}/{}: {e}", run.run))?;
            ensure(m.report == run.report, || format!("{rq}/{}: manifest report differs", run.run))?;
            ensure(!m.train.fingerprint.is_empty() && !m.test.fingerprint.is_empty(), || {
                format!("{rq}/{}: missing fingerprints", run.run)
            })?;
            ensure(run.manifest.with_file_name("predictions.jsonl").exists(), || format!("{rq}/{}: no predictions", run.run))?;
            manifests.push(m);
        }
        match rq {
            Rq::Rq1 => ensure(manifests[0].train.sentences < manifests[1].train.sentences, || {
                "augmented training set is not larger".into()
            })?,
            Rq::Rq4 => ensure(result.packages.len() == 3, || "package stats missing".into())?,
            Rq::Rq5 => {
                let mut seeds: Vec<u64> = manifests.iter().map(|m| m.seed).collect();
                seeds.dedup();
                ensure(seeds.len() == 10, || "repeat seeds are not distinct".into())?;
                ensure(manifests.iter().all(|m| m.train.sentences == 8), || "k=1 runs must train on 8 sentences".into())?;
            }
            _ => {}
        }
        summary.push(format!("{rq} {rows}x{runs}"));
    }
    Ok(summary.join(", "))
}

#[test]
fn acceptance() {
    let checks: [Criterion; 10] = [
        ("sel round-trip", sel_round_trip),
        ("sel parse totality", parse_totality),
        ("prompt bit-exactness", prompt_exact),
        ("metric oracle equivalence", metric_oracle),
        ("loss identities", loss_identities),
        ("augmentation properties", augmentation_properties),
        ("filter fixtures", filter_fixtures),
        ("overfit smoke", overfit_smoke),
        ("k-shot sampler", kshot_sampler),
        ("rq harness structure", rq_structure),
    ];
    // the stderr handle bypasses test output capture, so the lines always show
    let mut err = std::io::stderr();
    let mut failed = Vec::new();
    for (name, check) in checks {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => writeln!(err, "PASS {name}: {detail}").unwrap(),
            Err(why) => {
                writeln!(err, "FAIL {name}: {why}").unwrap();
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed: {failed:?}");
}
