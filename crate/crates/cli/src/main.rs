//! `apirel`: command-line front end for ingestion, labelling utilities,
//! training, extraction, scoring and the study protocols.

mod io;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use apirel::annotations::{load_gold, make_splits, save_gold};
use apirel::augment::{augment_dataset, AugmentOptions, HeuristicParser, SynonymSource};
use apirel::candidate::{filter_sentences, judge_token, load_inventory};
use apirel::classifier::{train_classifier, EncoderClassifier, KeywordClassifier, RelationClassifier};
use apirel::corpus::{ingest, IngestOptions};
use apirel::eval::{evaluate_dataset, format_table};
use apirel::experiments::{
    kshot_sample, render_svg, ClassifierKind, ClassifierSource, ConfigFile, ExperimentData, Harness, Rq, RqResult,
};
use apirel::extractor::{load_adapter, read_predictions, train_extractor, write_predictions, Pipeline, PromptMode};
use apirel::sel::{decode_sel_text, encode_sel, validate_sel};
use apirel::Split;

use crate::io::{read_input, read_sentences, read_text, write_json, write_jsonl};

/// Sidecar next to a trained extractor recording how prompts were built.
const PIPELINE_FILE: &str = "pipeline.json";

#[derive(Parser)]
#[command(name = "apirel", version, about = "Joint API entity and relation extraction")]
struct Cli {
    /// TOML file with [experiment], [finetune] and [classifier] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tagged questions' best answers to tokenized sentences (JSONL).
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "java")]
        tag: String,
        /// Keep this many sampled questions.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Keep sentences with API-like tokens.
    Filter {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        inventory: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Print the verdict of every token instead of writing sentences.
        #[arg(long)]
        explain: bool,
    },
    /// Add morphology and verb mutants to a split gold dataset.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        synonyms: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        no_morph: bool,
        #[arg(long)]
        no_verb: bool,
        /// One morphology mutant per sentence, substituting every entity.
        #[arg(long)]
        combined_morph: bool,
    },
    /// Seeded train/test split of unmutated gold examples.
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.8)]
        ratio: f64,
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
    },
    /// Train the relation-type classifier on gold examples with relations.
    TrainClassifier {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model_dir: PathBuf,
    },
    /// Fine-tune an extractor on gold examples.
    TrainExtractor {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        model_dir: PathBuf,
        #[command(flatten)]
        prompt: PromptArgs,
        /// Backbone preset or `stub`; defaults to the configured one.
        #[arg(long)]
        backbone: Option<String>,
    },
    /// Run a trained extractor over sentences.
    Extract {
        #[arg(long)]
        model_dir: PathBuf,
        /// Sentence or gold JSONL.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        prompt: PromptArgs,
    },
    /// Score prediction JSONL against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        predictions: PathBuf,
        /// Score only this split of the gold file.
        #[arg(long, value_enum)]
        split: Option<SplitArg>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    Rq1(RqArgs),
    Rq2(RqArgs),
    Rq3(RqArgs),
    Rq4(RqArgs),
    Rq5(RqArgs),
    /// Draw k sentences per relation type plus k entity-only sentences.
    KshotSample {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Structured extraction string utilities.
    Sel {
        #[command(subcommand)]
        command: SelCommand,
    },
    /// Bar chart of a results.json written by an rq command.
    Plot {
        #[arg(long)]
        results: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        title: Option<String>,
    },
}

#[derive(Subcommand)]
enum SelCommand {
    /// Check strings against the grammar, one per line (`-` reads stdin).
    Validate { input: PathBuf },
    /// Print the canonical string of every gold line.
    Encode { gold: PathBuf },
    /// Decode one string against its sentence.
    Decode {
        #[arg(long)]
        text: String,
        #[arg(long, default_value = "s")]
        sentence_id: String,
        sel: String,
    },
}

#[derive(Args, Clone, Default)]
struct PromptArgs {
    /// static, dynamic[:n], entity-only or relation-only[:n].
    #[arg(long)]
    prompt_mode: Option<PromptMode>,
    /// `keyword`, `encoder` (trained on the training set) or a saved
    /// classifier directory.
    #[arg(long)]
    classifier: Option<String>,
}

#[derive(Args)]
struct RqArgs {
    /// Gold JSONL split by each line's `split` field.
    #[arg(long, conflicts_with_all = ["train", "test"])]
    gold: Option<PathBuf>,
    /// Final (possibly augmented) training set.
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Training set before augmentation; defaults to the unmutated part of
    /// the final one.
    #[arg(long)]
    initial_train: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitArg {
    Train,
    Test,
}

#[derive(Serialize, Deserialize)]
struct PipelineSidecar {
    prompt_mode: PromptMode,
    classifier: String,
}

fn load_config(cli: &Cli) -> Result<ConfigFile> {
    let mut cfg = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.experiment.seed = seed;
        cfg.finetune.seed = seed;
        cfg.classifier.seed = seed;
    }
    Ok(cfg)
}

/// `keyword` or a saved classifier directory.
fn resolve_classifier(spec: &str) -> Result<Arc<dyn RelationClassifier>> {
    match spec {
        "keyword" => Ok(Arc::new(KeywordClassifier::default())),
        "encoder" => bail!("`encoder` is only available while training; pass a saved classifier directory"),
        dir => Ok(Arc::new(
            EncoderClassifier::load(Path::new(dir)).with_context(|| format!("loading classifier from {dir}"))?,
        )),
    }
}

fn default_classifier(cfg: &ConfigFile) -> &'static str {
    match cfg.experiment.classifier {
        ClassifierKind::Keyword => "keyword",
        ClassifierKind::Encoder => "encoder",
    }
}

fn rq_data(args: &RqArgs) -> Result<ExperimentData> {
    let mut data = ExperimentData::default();
    if let Some(gold) = &args.gold {
        let all = load_gold(gold)?;
        data.final_train = Some(all.split(Split::Train));
        data.final_test = Some(all.split(Split::Test));
    } else {
        data.final_train = args.train.as_deref().map(load_gold).transpose()?;
        data.final_test = args.test.as_deref().map(load_gold).transpose()?;
    }
    data.initial_train = args.initial_train.as_deref().map(load_gold).transpose()?;
    Ok(data)
}

fn run_rq(rq: Rq, args: &RqArgs, cli: &Cli, cfg: &ConfigFile) -> Result<()> {
    let classifier = match cfg.experiment.classifier {
        ClassifierKind::Keyword => ClassifierSource::Keyword,
        ClassifierKind::Encoder => ClassifierSource::Encoder(cfg.classifier.clone()),
    };
    let harness = Harness {
        config: cfg.experiment.clone(),
        finetune: cfg.finetune.clone(),
        classifier,
        out_dir: cli.out_dir.clone(),
    };
    let result = harness.run(rq, &rq_data(args)?)?;
    print!("{}", result.table());
    for p in &result.packages {
        println!(
            "{}: {} sentences, {} with relations ({} unmutated)",
            p.package, p.sentences, p.with_relations, p.original_with_relations
        );
    }
    println!("results: {}", cli.out_dir.join(rq.to_string()).join("results.json").display());
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match &cli.command {
        Command::Ingest { input, tag, sample, output } => {
            let options = IngestOptions {
                tag: tag.to_lowercase(),
                sample: *sample,
                seed: cfg.experiment.seed,
                ..IngestOptions::default()
            };
            let report = ingest(input, &options)?;
            write_jsonl(&report.sentences, output)?;
            println!(
                "{} questions, {} answered, {} sentences, {} malformed records skipped",
                report.questions,
                report.answered,
                report.sentences.len(),
                report.warnings
            );
        }
        Command::Filter { input, inventory, output, explain } => {
            let inventory = load_inventory(inventory)?;
            let sentences = read_sentences(input)?;
            if *explain {
                for s in &sentences {
                    for t in &s.tokens {
                        let v = judge_token(t, &inventory);
                        if v.is_candidate {
                            println!("{}\t{}\t{:?}", s.sentence_id, t.surface, v.reasons);
                        }
                    }
                }
            }
            let kept = filter_sentences(&sentences, &inventory);
            write_jsonl(&kept, output)?;
            println!("kept {} of {} sentences", kept.len(), sentences.len());
        }
        Command::Augment { input, synonyms, output, no_morph, no_verb, combined_morph } => {
            let dataset = load_gold(input)?;
            let synonyms = SynonymSource::load(synonyms)?;
            let parser = HeuristicParser::with_lexicon(synonyms.lemmas());
            let options = AugmentOptions {
                morph: !no_morph,
                verb: !no_verb,
                combined_morph: *combined_morph,
            };
            let (augmented, report) = augment_dataset(&dataset, &synonyms, &parser, options);
            io::ensure_parent(output)?;
            save_gold(&augmented, output)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Split { input, ratio, train, test } => {
            let dataset = load_gold(input)?;
            let (tr, te) = make_splits(&dataset, *ratio, cfg.experiment.seed)?;
            for (d, path) in [(&tr, train), (&te, test)] {
                io::ensure_parent(path)?;
                save_gold(d, path)?;
            }
            println!("train {} / test {}", tr.len(), te.len());
        }
        Command::TrainClassifier { train, model_dir } => {
            let dataset = load_gold(train)?.with_relations();
            let clf = train_classifier(&dataset, &cfg.classifier)?;
            clf.save(model_dir)?;
            println!(
                "trained on {} sentences; final loss {:.4}",
                dataset.len(),
                clf.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::TrainExtractor { train, model_dir, prompt, backbone } => {
            let dataset = load_gold(train)?;
            let mode = prompt.prompt_mode.unwrap_or(cfg.experiment.prompt_mode);
            let mut finetune = cfg.finetune.clone();
            if let Some(b) = backbone {
                finetune.backbone_name = b.clone();
            }
            let spec = prompt.classifier.clone().unwrap_or_else(|| default_classifier(&cfg).to_string());
            let (classifier, classifier_ref): (Option<Arc<dyn RelationClassifier>>, String) =
                match (mode.needs_classifier(), spec.as_str()) {
                    (false, _) => (None, "none".into()),
                    (true, "encoder") => {
                        // saved beside the extractor so extraction reuses it
                        let trained = train_classifier(&dataset.with_relations(), &cfg.classifier)?;
                        let dir = model_dir.join("classifier");
                        trained.save(&dir)?;
                        (Some(Arc::new(trained)), dir.display().to_string())
                    }
                    (true, other) => (Some(resolve_classifier(other)?), other.to_string()),
                };
            let (adapter, report) = train_extractor(&dataset, mode, classifier.as_deref(), &finetune)?;
            adapter.save(model_dir)?;
            write_json(
                &PipelineSidecar {
                    prompt_mode: mode,
                    classifier: classifier_ref,
                },
                &model_dir.join(PIPELINE_FILE),
            )?;
            write_json(&report, &model_dir.join("finetune_report.json"))?;
            println!(
                "{} pairs, {} epochs, final loss {:.4}",
                dataset.len(),
                report.epoch_losses.len(),
                report.epoch_losses.last().copied().unwrap_or(0.0)
            );
        }
        Command::Extract { model_dir, input, output, prompt } => {
            let sidecar: Option<PipelineSidecar> = match read_text(&model_dir.join(PIPELINE_FILE)) {
                Ok(s) => Some(serde_json::from_str(&s)?),
                Err(_) => None,
            };
            let mode = prompt
                .prompt_mode
                .or(sidecar.as_ref().map(|s| s.prompt_mode))
                .unwrap_or(cfg.experiment.prompt_mode);
            let spec = prompt
                .classifier
                .clone()
                .or(sidecar.map(|s| s.classifier).filter(|c| c != "none"))
                .unwrap_or_else(|| "keyword".into());
            let classifier = if mode.needs_classifier() {
                Some(resolve_classifier(&spec)?)
            } else {
                None
            };
            let adapter = load_adapter(model_dir)?;
            let sentences = read_sentences(input)?;
            let pipeline = Pipeline {
                adapter: adapter.as_ref(),
                classifier: classifier.as_deref(),
                mode,
            };
            let extractions = pipeline.extract_all(&sentences)?;
            io::ensure_parent(output)?;
            write_predictions(&extractions, output)?;
            let diagnostics: usize = extractions.iter().map(|x| x.diagnostics.len()).sum();
            println!("{} sentences, {} decode diagnostics", extractions.len(), diagnostics);
        }
        Command::Evaluate { gold, predictions, split, report } => {
            let mut dataset = load_gold(gold)?;
            if let Some(s) = split {
                dataset = dataset.split(match s {
                    SplitArg::Train => Split::Train,
                    SplitArg::Test => Split::Test,
                });
            }
            let mut preds = read_predictions(predictions)?;
            if split.is_some() {
                preds.retain(|p| dataset.get(&p.sentence_id).is_some());
            }
            let metrics = evaluate_dataset(&dataset, &preds)?;
            print!("{}", format_table(&[(dataset.name.clone(), metrics.clone())]));
            if let Some(path) = report {
                write_json(&metrics, path)?;
            }
        }
        Command::Rq1(a) => run_rq(Rq::Rq1, a, cli, &cfg)?,
        Command::Rq2(a) => run_rq(Rq::Rq2, a, cli, &cfg)?,
        Command::Rq3(a) => run_rq(Rq::Rq3, a, cli, &cfg)?,
        Command::Rq4(a) => run_rq(Rq::Rq4, a, cli, &cfg)?,
        Command::Rq5(a) => run_rq(Rq::Rq5, a, cli, &cfg)?,
        Command::KshotSample { train, k, output } => {
            let pool = load_gold(train)?;
            let sample = kshot_sample(&pool, *k, cfg.experiment.seed)?;
            io::ensure_parent(output)?;
            save_gold(&sample.dataset, output)?;
            let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
            for c in &sample.classes {
                *counts.entry(c.as_str()).or_default() += 1;
            }
            for (class, n) in counts {
                println!("{class}\t{n}");
            }
        }
        Command::Sel { command } => sel(command)?,
        Command::Plot { results, output, title } => {
            let result: RqResult = serde_json::from_str(&read_text(results)?)
                .with_context(|| format!("{} is not an rq results file", results.display()))?;
            let title = title.clone().unwrap_or_else(|| result.rq.to_string().to_uppercase());
            io::ensure_parent(output)?;
            std::fs::write(output, render_svg(&title, &result.rows))
                .with_context(|| format!("writing {}", output.display()))?;
        }
    }
    Ok(())
}

fn sel(command: &SelCommand) -> Result<()> {
    match command {
        SelCommand::Validate { input } => {
            let text = read_input(input)?;
            let mut bad = 0;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let diagnostics = validate_sel(line);
                if diagnostics.is_empty() {
                    println!("{}: ok", i + 1);
                } else {
                    bad += 1;
                    for d in diagnostics {
                        println!("{}: {d}", i + 1);
                    }
                }
            }
            if bad > 0 {
                bail!("{bad} invalid line(s)");
            }
        }
        SelCommand::Encode { gold } => {
            for e in load_gold(gold)?.examples {
                println!("{}\t{}", e.id(), encode_sel(&e.record));
            }
        }
        SelCommand::Decode { text, sentence_id, sel } => {
            let decoded = decode_sel_text(sel, sentence_id, text);
            for d in &decoded.diagnostics {
                eprintln!("warning: {d}");
            }
            let line = apirel::annotations::GoldLine::from_example(&apirel::Example::new(
                apirel::Sentence::from_text(sentence_id.clone(), text.clone()),
                decoded.record,
            ));
            println!("{}", serde_json::to_string(&line)?);
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(&cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
