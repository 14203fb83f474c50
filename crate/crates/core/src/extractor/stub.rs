use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{corpus_fingerprint, FinetuneConfig, FinetuneReport, Seq2SeqAdapter, TrainPair, STUB_BACKBONE};
use crate::error::{Error, Result};
use crate::sel::SelSequence;

const STUB_FILE: &str = "stub.json";

/// Lookup-table generator: fine-tuning memorizes pairs, generation returns
/// the memorized target or `()` for an unseen prompt.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StubAdapter {
    table: BTreeMap<String, String>,
}

impl StubAdapter {
    pub fn from_pairs(pairs: &[TrainPair]) -> Self {
        let mut s = StubAdapter::default();
        for p in pairs {
            s.insert(p.prompt_text.clone(), p.target_sel.clone());
        }
        s
    }

    /// Later inserts for the same prompt win.
    pub fn insert(&mut self, prompt_text: String, target_sel: String) {
        self.table.insert(prompt_text, target_sel);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn is_checkpoint(dir: &Path) -> bool {
        dir.join(STUB_FILE).is_file()
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(STUB_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Backend(format!("{}: {e}", path.display())))
    }
}

impl Seq2SeqAdapter for StubAdapter {
    fn backbone_name(&self) -> &str {
        STUB_BACKBONE
    }

    fn generate(&self, prompt_text: &str) -> Result<SelSequence> {
        let text = self.table.get(prompt_text).cloned().unwrap_or_else(|| "()".into());
        Ok(SelSequence::new(text))
    }

    fn finetune(&mut self, pairs: &[TrainPair], config: &FinetuneConfig) -> Result<FinetuneReport> {
        config.validate()?;
        if config.epochs > 0 {
            for p in pairs {
                self.insert(p.prompt_text.clone(), p.target_sel.clone());
            }
        }
        Ok(FinetuneReport {
            epoch_losses: vec![0.0; config.epochs],
            corpus_fingerprint: corpus_fingerprint(pairs),
            ..FinetuneReport::default()
        })
    }

    fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join(STUB_FILE);
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Backend(e.to_string()))?;
        fs::write(&path, json).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn memorizes_and_round_trips() {
        let pairs = vec![TrainPair {
            prompt_text: "[spot] API [text] a()".into(),
            target_sel: "((API: a()))".into(),
        }];
        let mut stub = StubAdapter::default();
        let report = stub.finetune(&pairs, &FinetuneConfig { epochs: 1, ..FinetuneConfig::default() }).unwrap();
        assert_eq!(report.corpus_fingerprint.len(), 64);
        assert_eq!(stub.generate(&pairs[0].prompt_text).unwrap().text, "((API: a()))");
        assert_eq!(stub.generate("other").unwrap().text, "()");
        let dir = tempfile::tempdir().unwrap();
        stub.save(dir.path()).unwrap();
        assert!(StubAdapter::is_checkpoint(dir.path()));
        assert_eq!(StubAdapter::load(dir.path()).unwrap(), stub);
    }

    #[test]
    fn zero_epochs_leaves_table_unchanged() {
        let pairs = vec![TrainPair {
            prompt_text: "p".into(),
            target_sel: "()".into(),
        }];
        let mut stub = StubAdapter::default();
        stub.finetune(&pairs, &FinetuneConfig { epochs: 0, ..FinetuneConfig::default() }).unwrap();
        assert!(stub.is_empty());
    }
}
