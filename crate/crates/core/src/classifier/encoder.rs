use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{ClassifierOutput, RelationClassifier};
use crate::annotations::{Dataset, RelationType};
use crate::error::{Error, Result};
use crate::nn::vocab::BOS;
use crate::nn::{load_params, save_params, train_loop, BackboneConfig, EncoderClassifierModel, TrainSpec, Vocab};

const WEIGHTS_FILE: &str = "weights.bin";
const SIDECAR_FILE: &str = "classifier.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    /// Backbone preset; only the encoder half is used.
    pub encoder_name: String,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub max_input_len: usize,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            encoder_name: "seq2seq-tiny".into(),
            learning_rate: 2e-5,
            epochs: 10,
            batch_size: 16,
            seed: 42,
            max_input_len: 512,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 || self.epochs == 0 || self.batch_size == 0 || self.max_input_len < 2 {
            return Err(Error::Config(
                "classifier learning_rate, epochs, batch_size must be positive and max_input_len >= 2".into(),
            ));
        }
        BackboneConfig::preset(&self.encoder_name)
            .map(|_| ())
            .ok_or_else(|| Error::Config(format!("unknown encoder `{}`", self.encoder_name)))
    }
}

/// Trained first-position-pooled encoder classifier.
#[derive(Debug, Clone)]
pub struct EncoderClassifier {
    model: EncoderClassifierModel,
    vocab: Vocab,
    pub config: ClassifierConfig,
    pub epoch_losses: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    enum_order: Vec<String>,
    config: ClassifierConfig,
    backbone: BackboneConfig,
    vocab: Vocab,
    epoch_losses: Vec<f64>,
}

impl EncoderClassifier {
    fn ids(&self, text: &str) -> Vec<usize> {
        encode_with_cls(&self.vocab, text, self.config.max_input_len)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        save_params(&self.model.store, &dir.join(WEIGHTS_FILE))?;
        let sidecar = Sidecar {
            enum_order: RelationType::ALL.iter().map(|r| r.name().to_string()).collect(),
            config: self.config.clone(),
            backbone: self.model.config.clone(),
            vocab: self.vocab.clone(),
            epoch_losses: self.epoch_losses.clone(),
        };
        let path = dir.join(SIDECAR_FILE);
        let json = serde_json::to_string_pretty(&sidecar).map_err(|e| Error::Backend(e.to_string()))?;
        fs::write(&path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(SIDECAR_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut sidecar: Sidecar =
            serde_json::from_str(&text).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))?;
        let expected: Vec<String> = RelationType::ALL.iter().map(|r| r.name().to_string()).collect();
        if sidecar.enum_order != expected {
            return Err(Error::Backend("checkpoint relation order differs from this build".into()));
        }
        sidecar.vocab.reindex();
        let mut model = EncoderClassifierModel::new(
            sidecar.backbone,
            sidecar.vocab.len(),
            RelationType::COUNT,
            sidecar.config.max_input_len,
            sidecar.config.seed,
        );
        load_params(&mut model.store, &dir.join(WEIGHTS_FILE))?;
        Ok(EncoderClassifier {
            model,
            vocab: sidecar.vocab,
            config: sidecar.config,
            epoch_losses: sidecar.epoch_losses,
        })
    }
}

fn encode_with_cls(vocab: &Vocab, text: &str, max_len: usize) -> Vec<usize> {
    let mut ids = vec![BOS];
    ids.extend(vocab.encode(text));
    if ids.len() > max_len {
        log::warn!("classifier input truncated from {} to {max_len} pieces", ids.len());
        ids.truncate(max_len);
    }
    ids
}

impl RelationClassifier for EncoderClassifier {
    fn predict(&self, text: &str) -> ClassifierOutput {
        let z = self.model.logits(&self.ids(text));
        let mut logits = [0.0; RelationType::COUNT];
        logits.copy_from_slice(&z);
        ClassifierOutput::from_logits(logits)
    }
}

/// Train on every example; a sentence with several relation types yields
/// one instance per distinct type.
pub fn train_classifier(train_set: &Dataset, config: &ClassifierConfig) -> Result<EncoderClassifier> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidInput("classifier training set is empty".into()));
    }
    if let Some(e) = train_set.examples.iter().find(|e| !e.has_relations()) {
        return Err(Error::InvalidInput(format!(
            "classifier training example `{}` has no relation",
            e.id()
        )));
    }
    let vocab = Vocab::build(train_set.examples.iter().map(|e| e.sentence.text.as_str()), &[]);
    let backbone = BackboneConfig::preset(&config.encoder_name).expect("validated");
    let mut model = EncoderClassifierModel::new(backbone, vocab.len(), RelationType::COUNT, config.max_input_len, config.seed);
    let instances: Vec<(Vec<usize>, usize)> = train_set
        .examples
        .iter()
        .flat_map(|e| {
            let ids = encode_with_cls(&vocab, &e.sentence.text, config.max_input_len);
            e.record.relation_types().into_iter().map(move |r| (ids.clone(), r.index()))
        })
        .collect();
    let spec = TrainSpec {
        epochs: config.epochs,
        batch_size: config.batch_size,
        learning_rate: config.learning_rate as f32,
        warmup_fraction: 0.0,
        max_grad_norm: 1.0,
        seed: config.seed,
    };
    let arch = &model.arch;
    let epoch_losses = train_loop(&mut model.store, &instances, &spec, |store, (ids, c)| {
        arch.loss_and_grads(store, ids, *c)
    });
    Ok(EncoderClassifier {
        model,
        vocab,
        config: config.clone(),
        epoch_losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotations::{EntityMention, Example, ExtractionRecord, RelationInstance};
    use crate::corpus::Sentence;

    fn example(id: &str, text: &str, r: RelationType) -> Example {
        let words: Vec<&str> = text.split(' ').collect();
        let a = words[0];
        let b = words[words.len() - 1];
        let start_b = text.chars().count() - b.chars().count();
        let ha = EntityMention::new(a, 0, a.chars().count());
        let hb = EntityMention::new(b, start_b, start_b + b.chars().count());
        let mut rec = ExtractionRecord::new(id);
        rec.entities = vec![ha.clone(), hb.clone()];
        rec.relations = vec![RelationInstance::new(ha, r, hb)];
        Example::new(Sentence::from_text(id, text), rec.normalized())
    }

    pub(crate) fn eight() -> Dataset {
        let texts = [
            "a() works like b()",
            "c() differs from d()",
            "open() must precede read()",
            "parse() turns text into int()",
            "lock() pairs with unlock()",
            "StringBuilder outruns StringBuffer",
            "getint() replaces get()",
            "x() mirrors y()",
        ];
        let examples = texts
            .iter()
            .enumerate()
            .map(|(i, t)| example(&format!("c{i}"), t, RelationType::ALL[i % 7]))
            .collect();
        Dataset::new("cls", examples)
    }

    fn fast() -> ClassifierConfig {
        ClassifierConfig {
            learning_rate: 3e-3,
            epochs: 50,
            batch_size: 4,
            ..ClassifierConfig::default()
        }
    }

    #[test]
    fn overfits_eight_sentences() {
        let ds = eight();
        let clf = train_classifier(&ds, &fast()).unwrap();
        assert!(clf.epoch_losses.last().unwrap() < clf.epoch_losses.first().unwrap());
        let correct = ds
            .examples
            .iter()
            .filter(|e| clf.predict_topn(&e.sentence.text, 1).unwrap()[0].0 == e.record.relations[0].relation)
            .count();
        assert!(correct as f64 / ds.len() as f64 >= 0.99, "{correct}/8");
    }

    #[test]
    fn rejects_empty_and_relationless_sets() {
        assert!(train_classifier(&Dataset::new("e", vec![]), &fast()).is_err());
        let mut ds = eight();
        ds.examples[0].record.relations.clear();
        assert!(train_classifier(&ds, &fast()).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let ds = eight();
        let clf = train_classifier(&ds, &ClassifierConfig { epochs: 2, ..fast() }).unwrap();
        let dir = tempfile::tempdir().unwrap();
        clf.save(dir.path()).unwrap();
        let back = EncoderClassifier::load(dir.path()).unwrap();
        let t = &ds.examples[3].sentence.text;
        assert_eq!(clf.predict(t), back.predict(t));
    }
}
