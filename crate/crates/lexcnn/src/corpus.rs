//! Labeled sentiment datasets: tokenization, loading and label statistics.
//!
//! Dataset files are UTF-8, tab-separated, one document per line:
//!
//! ```text
//! id<TAB>label<TAB>text
//! ```
//!
//! Lines beginning with `#` are comments and blank lines are skipped.
//!
//! # Tokenizer
//!
//! The same rule-based tokenizer is applied to corpora, embedding lookup and
//! lexicon lookup, so the three vocabularies stay coherent. The rules, in
//! order:
//!
//! 1. lowercase the text and split on whitespace;
//! 2. within each chunk, every character that is neither alphanumeric nor
//!    an ASCII apostrophe becomes its own token, splitting the chunk;
//! 3. a word ending in `n't` is split before the `n` (`can't` → `ca`, `n't`);
//! 4. any other word-internal apostrophe starts a new token that keeps the
//!    apostrophe (`it's` → `it`, `'s`).
//!
//! The output is deterministic and idempotent: re-tokenizing the tokens
//! joined by spaces returns the same sequence.

use std::fmt;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::error::{Error, Result};

/// Closed set of label schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelScheme {
    /// positive / neutral / negative
    Three,
    /// verypositive / positive / neutral / negative / verynegative
    Five,
}

impl LabelScheme {
    pub fn classes(&self) -> usize {
        match self {
            LabelScheme::Three => 3,
            LabelScheme::Five => 5,
        }
    }

    pub fn labels(&self) -> &'static [&'static str] {
        match self {
            LabelScheme::Three => &["positive", "neutral", "negative"],
            LabelScheme::Five => &[
                "verypositive",
                "positive",
                "neutral",
                "negative",
                "verynegative",
            ],
        }
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels().iter().position(|l| *l == label)
    }

    pub fn label_name(&self, index: usize) -> &'static str {
        self.labels()[index]
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "3" | "three" => Ok(LabelScheme::Three),
            "5" | "five" => Ok(LabelScheme::Five),
            other => Err(Error::Config(format!(
                "unknown label scheme `{other}` (expected 3 or 5)"
            ))),
        }
    }
}

impl fmt::Display for LabelScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelScheme::Three => write!(f, "3"),
            LabelScheme::Five => write!(f, "5"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Trn,
    Dev,
    Tst,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Split::Trn => write!(f, "TRN"),
            Split::Dev => write!(f, "DEV"),
            Split::Tst => write!(f, "TST"),
        }
    }
}

/// One tokenized, labeled document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<String>,
    pub label: usize,
}

/// An immutable collection of documents sharing one label scheme.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub documents: Vec<Document>,
    pub scheme: LabelScheme,
    pub split: Split,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    /// Distinct token types, in first-occurrence order.
    pub fn word_types(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        let mut types = Vec::new();
        for doc in &self.documents {
            for tok in &doc.tokens {
                if seen.insert(tok.as_str()) {
                    types.push(tok.as_str());
                }
            }
        }
        types
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\''
}

/// Splits a run of word characters at apostrophes: `n't` endings first,
/// then any apostrophe not at position 0.
fn split_word(word: &str, out: &mut Vec<String>) {
    if let Some(head) = word.strip_suffix("n't") {
        if head.is_empty() {
            out.push(word.to_string());
        } else {
            split_word(head, out);
            out.push("n't".to_string());
        }
        return;
    }
    let inner = word
        .char_indices()
        .skip(1)
        .find(|&(_, c)| c == '\'')
        .map(|(i, _)| i);
    match inner {
        Some(i) => {
            out.push(word[..i].to_string());
            split_word(&word[i..], out);
        }
        None => out.push(word.to_string()),
    }
}

/// Rule-based tokenizer; see the module docs for the exact rules.
pub fn tokenize(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let mut tokens = Vec::new();
    for chunk in lowered.split_whitespace() {
        let mut word = String::new();
        for c in chunk.chars() {
            if is_word_char(c) {
                word.push(c);
            } else {
                if !word.is_empty() {
                    split_word(&word, &mut tokens);
                    word.clear();
                }
                tokens.push(c.to_string());
            }
        }
        if !word.is_empty() {
            split_word(&word, &mut tokens);
        }
    }
    tokens
}

/// Loads a tab-separated dataset file. Every row must have an id, a label
/// known to `scheme`, and text that still has at least one token after
/// tokenization; the first offending row fails the whole load with its line
/// number.
pub fn load_dataset(path: &Path, scheme: LabelScheme, split: Split) -> Result<Dataset> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let reader = BufReader::new(file);
    let mut documents = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        documents.push(parse_row(&line, scheme, &display, lineno)?);
    }
    Ok(Dataset {
        documents,
        scheme,
        split,
    })
}

fn parse_row(line: &str, scheme: LabelScheme, path: &str, lineno: usize) -> Result<Document> {
    let mut fields = line.splitn(3, '\t');
    let id = fields.next().unwrap_or_default();
    let label = fields
        .next()
        .ok_or_else(|| Error::parse(path, lineno, "expected id<TAB>label<TAB>text"))?;
    let text = fields
        .next()
        .ok_or_else(|| Error::parse(path, lineno, "expected id<TAB>label<TAB>text"))?;
    let label = scheme.label_index(label).ok_or_else(|| {
        Error::parse(
            path,
            lineno,
            format!("unknown label `{label}` for the {scheme}-class scheme"),
        )
    })?;
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(Error::parse(
            path,
            lineno,
            "document is empty after tokenization",
        ));
    }
    Ok(Document {
        id: id.to_string(),
        tokens,
        label,
    })
}

/// Per-label document counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStats {
    pub scheme: LabelScheme,
    pub counts: Vec<usize>,
    pub total: usize,
}

pub fn dataset_stats(ds: &Dataset) -> DatasetStats {
    let mut counts = vec![0usize; ds.scheme.classes()];
    for doc in &ds.documents {
        counts[doc.label] += 1;
    }
    DatasetStats {
        scheme: ds.scheme,
        counts,
        total: ds.documents.len(),
    }
}
