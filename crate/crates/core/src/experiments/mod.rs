//! Experiment protocols: configuration, few-shot sampling, package
//! buckets, and the research-question harnesses.

mod harness;
mod kshot;
mod packages;
mod plot;

pub use harness::{ClassifierSource, ExperimentData, Harness, Manifest, RqResult, RunResult, Rq};
pub use kshot::{kshot_sample, KshotSample, ENTITY_ONLY_CLASS};
pub use packages::{bucket_stats, package_split, tag_matches_package, PackageStats, DEFAULT_PACKAGES};
pub use plot::render_svg;

use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use crate::classifier::ClassifierConfig;
use crate::error::{Error, Result};
use crate::extractor::{FinetuneConfig, PromptMode, STUB_BACKBONE};
use crate::nn::BackboneConfig;
use crate::prompt::DEFAULT_TOP_N;

/// Few-shot sizes of the low-resource protocol.
pub const PAPER_KSHOTS: [usize; 3] = [1, 5, 10];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[default]
    Keyword,
    Encoder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub prompt_mode: PromptMode,
    pub augmentation: bool,
    pub backbone_name: String,
    /// Backbone of the reduced-size variant.
    pub small_backbone_name: String,
    pub kshot: Option<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub package_filter: Option<Vec<String>>,
    pub classifier: ClassifierKind,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: "default".into(),
            prompt_mode: PromptMode::Dynamic(DEFAULT_TOP_N),
            augmentation: true,
            backbone_name: "seq2seq-base".into(),
            small_backbone_name: "seq2seq-small".into(),
            kshot: None,
            repeats: 10,
            seed: 42,
            package_filter: None,
            classifier: ClassifierKind::Keyword,
        }
    }
}

fn check_backbone(name: &str) -> Result<()> {
    if name == STUB_BACKBONE || BackboneConfig::preset(name).is_some() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "unknown backbone `{name}`; expected one of {:?} or `{STUB_BACKBONE}`",
            BackboneConfig::PRESETS
        )))
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.prompt_mode, PromptMode::Static | PromptMode::Dynamic(_)) {
            return Err(Error::Config(format!(
                "experiment prompt_mode must be static or dynamic, got `{}`",
                self.prompt_mode
            )));
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        match self.kshot {
            Some(0) => return Err(Error::Config("kshot must be positive".into())),
            Some(k) if !PAPER_KSHOTS.contains(&k) => {
                log::warn!("kshot {k} is outside the protocol sizes {PAPER_KSHOTS:?}")
            }
            _ => {}
        }
        check_backbone(&self.backbone_name)?;
        check_backbone(&self.small_backbone_name)
    }

    /// Top-n used by dynamic and relation-only prompts.
    pub fn top_n(&self) -> usize {
        match self.prompt_mode {
            PromptMode::Dynamic(n) | PromptMode::RelationOnly(n) => n,
            _ => DEFAULT_TOP_N,
        }
    }

    pub fn kshots(&self) -> Vec<usize> {
        self.kshot.map(|k| vec![k]).unwrap_or_else(|| PAPER_KSHOTS.to_vec())
    }
}

/// The whole configuration document: `[experiment]`, `[finetune]` and
/// `[classifier]` tables, each optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConfigFile {
    pub experiment: ExperimentConfig,
    pub finetune: FinetuneConfig,
    pub classifier: ClassifierConfig,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.experiment.validate()?;
        cfg.finetune.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ConfigFile::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_partial_documents() {
        let cfg = ConfigFile::parse(
            r#"
[experiment]
name = "smoke"
prompt_mode = "dynamic:4"
backbone_name = "stub"
repeats = 2
kshot = 5
package_filter = ["java.io"]

[finetune]
epochs = 3
learning_rate = 0.001
"#,
        )
        .unwrap();
        assert_eq!(cfg.experiment.prompt_mode, PromptMode::Dynamic(4));
        assert_eq!(cfg.experiment.kshots(), [5]);
        assert_eq!(cfg.finetune.epochs, 3);
        assert_eq!(cfg.finetune.batch_size, 10);
        assert_eq!(cfg.classifier, ClassifierConfig::default());
        assert_eq!(ConfigFile::parse(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ConfigFile::parse("[experiment]\nrepeats = 0").is_err());
        assert!(ConfigFile::parse("[experiment]\nprompt_mode = \"entity-only\"").is_err());
        assert!(ConfigFile::parse("[experiment]\nbackbone_name = \"gpt\"").is_err());
        assert!(ConfigFile::parse("[experiment]\nkshot = 0").is_err());
        assert!(ConfigFile::parse("[experiment]\nkshot = 3").is_ok());
        assert!(ConfigFile::parse("[finetune]\nwarmup_fraction = 2.0").is_err());
    }
}
