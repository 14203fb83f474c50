use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use super::{corpus_fingerprint, FinetuneConfig, FinetuneReport, GenerationConfig, Seq2SeqAdapter, TrainPair};
use crate::error::{Error, Result};
use crate::nn::vocab::EOS;
use crate::nn::{load_params, save_params, train_loop, BackboneConfig, Seq2SeqModel, TrainSpec, Vocab};
use crate::prompt::MARKERS;
use crate::sel::SelSequence;

const WEIGHTS_FILE: &str = "weights.bin";
const SIDECAR_FILE: &str = "extractor.json";

/// Generator backed by the in-crate encoder-decoder Transformer. The
/// vocabulary is fixed by the first fine-tuning corpus.
#[derive(Debug)]
pub struct TransformerAdapter {
    backbone: BackboneConfig,
    generation: GenerationConfig,
    trained: Option<Trained>,
    /// Prompts cut to `max_input_len` at generation time.
    truncated_prompts: AtomicUsize,
}

#[derive(Debug, Clone)]
struct Trained {
    vocab: Vocab,
    model: Seq2SeqModel,
    config: FinetuneConfig,
    fingerprint: String,
    epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    backbone: BackboneConfig,
    generation: GenerationConfig,
    finetune: FinetuneConfig,
    corpus_fingerprint: String,
    epoch_losses: Vec<f64>,
    vocab: Vocab,
}

impl TransformerAdapter {
    pub fn new(backbone_name: &str, generation: GenerationConfig) -> Result<Self> {
        let backbone = BackboneConfig::preset(backbone_name).ok_or_else(|| {
            Error::Config(format!(
                "unknown backbone `{backbone_name}`; expected one of {:?} or `stub`",
                BackboneConfig::PRESETS
            ))
        })?;
        Ok(TransformerAdapter {
            backbone,
            generation,
            trained: None,
            truncated_prompts: AtomicUsize::new(0),
        })
    }

    pub fn is_trained(&self) -> bool {
        self.trained.is_some()
    }

    pub fn truncated_prompts(&self) -> usize {
        self.truncated_prompts.load(Ordering::Relaxed)
    }

    pub fn epoch_losses(&self) -> &[f64] {
        self.trained.as_ref().map(|t| t.epoch_losses.as_slice()).unwrap_or(&[])
    }

    fn trained(&self) -> Result<&Trained> {
        self.trained
            .as_ref()
            .ok_or_else(|| Error::Backend("extractor has not been fine-tuned".into()))
    }

    fn encode_prompt(&self, vocab: &Vocab, prompt_text: &str) -> (Vec<usize>, bool) {
        let mut ids = vocab.encode(prompt_text);
        let cut = ids.len() > self.generation.max_input_len;
        ids.truncate(self.generation.max_input_len);
        (ids, cut)
    }

    fn encode_target(&self, vocab: &Vocab, target_sel: &str) -> (Vec<usize>, bool) {
        let mut ids = vocab.encode(target_sel);
        let room = self.generation.max_output_len - 1;
        let cut = ids.len() > room;
        ids.truncate(room);
        (ids, cut)
    }

    /// Teacher-forced `−log P(y <eos> | p)` for one pair.
    pub fn pair_loss(&self, pair: &TrainPair) -> Result<f64> {
        let t = self.trained()?;
        let (src, _) = self.encode_prompt(&t.vocab, &pair.prompt_text);
        let (tgt, _) = self.encode_target(&t.vocab, &pair.target_sel);
        Ok(t.model.loss(&src, &tgt))
    }

    /// `−Σ_j log P(y_j | p, y_<j)` accumulated one decoding step at a time
    /// through the scoring interface, `<eos>` included.
    pub fn stepwise_negative_log_likelihood(&self, pair: &TrainPair) -> Result<f64> {
        let t = self.trained()?;
        let (src, _) = self.encode_prompt(&t.vocab, &pair.prompt_text);
        let (mut tgt, _) = self.encode_target(&t.vocab, &pair.target_sel);
        tgt.push(EOS);
        let mut total = 0.0;
        for j in 0..tgt.len() {
            total -= t.model.next_token_log_probs(&src, &tgt[..j])[tgt[j]];
        }
        Ok(total)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SIDECAR_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        sidecar.vocab.reindex();
        let mut model = Seq2SeqModel::new(
            sidecar.backbone.clone(),
            sidecar.vocab.len(),
            sidecar.generation.max_input_len,
            sidecar.generation.max_output_len,
            sidecar.finetune.seed,
        );
        load_params(&mut model.store, &dir.join(WEIGHTS_FILE))?;
        Ok(TransformerAdapter {
            backbone: sidecar.backbone,
            generation: sidecar.generation,
            trained: Some(Trained {
                vocab: sidecar.vocab,
                model,
                config: sidecar.finetune,
                fingerprint: sidecar.corpus_fingerprint,
                epoch_losses: sidecar.epoch_losses,
            }),
            truncated_prompts: AtomicUsize::new(0),
        })
    }
}

impl Seq2SeqAdapter for TransformerAdapter {
    fn backbone_name(&self) -> &str {
        &self.backbone.name
    }

    fn generate(&self, prompt_text: &str) -> Result<SelSequence> {
        let t = self.trained()?;
        let (src, cut) = self.encode_prompt(&t.vocab, prompt_text);
        if cut {
            self.truncated_prompts.fetch_add(1, Ordering::Relaxed);
            log::warn!("prompt truncated to {} pieces", self.generation.max_input_len);
        }
        let ids = t.model.generate(&src, self.generation.max_output_len - 1, self.generation.beam_size);
        Ok(SelSequence::new(t.vocab.decode(&ids)))
    }

    fn finetune(&mut self, pairs: &[TrainPair], config: &FinetuneConfig) -> Result<FinetuneReport> {
        config.validate()?;
        if config.backbone_name != self.backbone.name {
            return Err(Error::Config(format!(
                "fine-tune config names backbone `{}` but the adapter holds `{}`",
                config.backbone_name, self.backbone.name
            )));
        }
        let fingerprint = corpus_fingerprint(pairs);
        if config.epochs == 0 {
            return Ok(FinetuneReport {
                corpus_fingerprint: fingerprint,
                ..FinetuneReport::default()
            });
        }
        if pairs.is_empty() {
            return Err(Error::InvalidInput("fine-tuning corpus is empty".into()));
        }
        self.generation = config.generation.clone();
        let mut trained = match self.trained.take() {
            Some(t) => t,
            None => {
                let atomic: &[&str] = if config.add_special_tokens { &MARKERS } else { &[] };
                let vocab = Vocab::build(
                    pairs.iter().flat_map(|p| [p.prompt_text.as_str(), p.target_sel.as_str()]),
                    atomic,
                );
                let model = Seq2SeqModel::new(
                    self.backbone.clone(),
                    vocab.len(),
                    self.generation.max_input_len,
                    self.generation.max_output_len,
                    config.seed,
                );
                Trained {
                    vocab,
                    model,
                    config: config.clone(),
                    fingerprint: String::new(),
                    epoch_losses: Vec::new(),
                }
            }
        };
        let mut truncated_inputs = 0;
        let mut truncated_targets = 0;
        let items: Vec<(Vec<usize>, Vec<usize>)> = pairs
            .iter()
            .map(|p| {
                let (src, cut_src) = self.encode_prompt(&trained.vocab, &p.prompt_text);
                let (tgt, cut_tgt) = self.encode_target(&trained.vocab, &p.target_sel);
                truncated_inputs += cut_src as usize;
                truncated_targets += cut_tgt as usize;
                (src, tgt)
            })
            .collect();
        if truncated_inputs + truncated_targets > 0 {
            log::warn!("{truncated_inputs} prompts and {truncated_targets} targets truncated");
        }
        let spec = TrainSpec {
            epochs: config.epochs,
            batch_size: config.batch_size,
            learning_rate: config.learning_rate as f32,
            warmup_fraction: config.warmup_fraction,
            max_grad_norm: config.max_grad_norm,
            seed: config.seed,
        };
        let arch = &trained.model.arch;
        let epoch_losses = train_loop(&mut trained.model.store, &items, &spec, |store, (src, tgt)| {
            arch.loss_and_grads(store, src, tgt)
        });
        trained.config = config.clone();
        trained.fingerprint = fingerprint.clone();
        trained.epoch_losses.extend_from_slice(&epoch_losses);
        self.trained = Some(trained);
        Ok(FinetuneReport {
            epoch_losses,
            truncated_inputs,
            truncated_targets,
            corpus_fingerprint: fingerprint,
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        let t = self.trained()?;
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_params(&t.model.store, &dir.join(WEIGHTS_FILE))?;
        let sidecar = Sidecar {
            backbone: self.backbone.clone(),
            generation: self.generation.clone(),
            finetune: t.config.clone(),
            corpus_fingerprint: t.fingerprint.clone(),
            epoch_losses: t.epoch_losses.clone(),
            vocab: t.vocab.clone(),
        };
        let path = dir.join(SIDECAR_FILE);
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Backend(e.to_string()))?;
        fs::write(&path, json).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs() -> Vec<TrainPair> {
        [
            ("[spot] API [text] use a() here", "((API: a()))"),
            ("[spot] API [text] b() then c()", "((API: b()) (API: c()))"),
            ("[spot] API [text] nothing", "()"),
        ]
        .iter()
        .map(|(p, t)| TrainPair {
            prompt_text: p.to_string(),
            target_sel: t.to_string(),
        })
        .collect()
    }

    fn tiny(epochs: usize) -> FinetuneConfig {
        FinetuneConfig {
            epochs,
            batch_size: 3,
            learning_rate: 3e-3,
            backbone_name: "seq2seq-tiny".into(),
            generation: GenerationConfig {
                max_input_len: 32,
                max_output_len: 24,
                beam_size: 1,
            },
            ..FinetuneConfig::default()
        }
    }

    #[test]
    fn unknown_backbone_and_untrained_use_fail() {
        assert!(TransformerAdapter::new("nope", GenerationConfig::default()).is_err());
        let a = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).unwrap();
        assert!(a.generate("x").is_err());
    }

    #[test]
    fn zero_epochs_is_a_no_op() {
        let mut a = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).unwrap();
        let r = a.finetune(&pairs(), &tiny(0)).unwrap();
        assert!(r.epoch_losses.is_empty());
        assert!(!a.is_trained());
    }

    #[test]
    fn stepwise_likelihood_matches_teacher_forced_loss() {
        let mut a = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).unwrap();
        a.finetune(&pairs(), &tiny(1)).unwrap();
        for p in pairs() {
            let tf = a.pair_loss(&p).unwrap();
            let sw = a.stepwise_negative_log_likelihood(&p).unwrap();
            assert!((tf - sw).abs() < 1e-4, "{tf} vs {sw}");
        }
    }

    #[test]
    fn overfits_three_pairs_and_round_trips() {
        let mut a = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).unwrap();
        let r = a.finetune(&pairs(), &tiny(60)).unwrap();
        assert!(r.epoch_losses.last().unwrap() < &r.epoch_losses[0]);
        for p in pairs() {
            assert_eq!(a.generate(&p.prompt_text).unwrap().text, p.target_sel);
        }
        let dir = tempfile::tempdir().unwrap();
        a.save(dir.path()).unwrap();
        let back = super::super::load_adapter(dir.path()).unwrap();
        assert_eq!(back.generate(&pairs()[1].prompt_text).unwrap().text, pairs()[1].target_sel);
    }

    #[test]
    fn counts_truncated_targets() {
        let mut a = TransformerAdapter::new("seq2seq-tiny", GenerationConfig::default()).unwrap();
        let mut cfg = tiny(1);
        cfg.generation.max_output_len = 4;
        let r = a.finetune(&pairs(), &cfg).unwrap();
        assert_eq!(r.truncated_targets, 2);
    }
}
