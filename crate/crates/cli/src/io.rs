use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::Value;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use apirel::annotations::GoldLine;
use apirel::Sentence;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

/// Read a file path, or stdin when the path is `-`.
pub fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        read_text(path)
    }
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

/// Sentences from JSONL holding either tokenized sentence records or gold
/// lines; tokens are recomputed for gold lines.
pub fn read_sentences(path: &Path) -> Result<Vec<Sentence>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(&line).with_context(|| format!("{}:{}: invalid JSON", path.display(), i + 1))?;
        let sentence = if value.get("tokens").is_some() {
            serde_json::from_value::<Sentence>(value)
                .with_context(|| format!("{}:{}: not a sentence record", path.display(), i + 1))?
        } else {
            let gold: GoldLine = serde_json::from_value(value)
                .with_context(|| format!("{}:{}: not a sentence or gold line", path.display(), i + 1))?;
            gold.into_example(i + 1)?.sentence
        };
        out.push(sentence);
    }
    if out.is_empty() {
        bail!("{} holds no sentences", path.display());
    }
    Ok(out)
}
