//! Word embeddings, lexicon embeddings and per-document matrices.
//!
//! # File formats
//!
//! *Word embeddings* are textual: a header line `V d` (vocabulary size and
//! dimension), then one `word v1 ... vd` line per word, space-separated.
//!
//! *Lexicon sources* are UTF-8 tab-separated files, `word<TAB>s1<TAB>s2...`
//! with a fixed score count per file; `#` lines are comments. The file stem
//! is used as the source name.
//!
//! A lexicon embedding for a word is the concatenation of its scores across
//! all sources, in source order; a word missing from a source gets zeros in
//! that source's columns. Scores are expected in `[-1, 1]`; any source
//! column whose observed values leave that range (frequency counts and the
//! like) is min-max rescaled per column via `2(x - min)/(max - min) - 1`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::ops::Range;
use std::path::Path;

use crate::corpus::{Dataset, Document};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::model::Mode;
use crate::provenance::fnv1a64;
use crate::rng::Rng;

/// How lookups of words absent from a [`WordEmbeddingTable`] behave.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OovPolicy {
    /// A fixed vector per word type, uniform in [-0.25, 0.25], derived from
    /// the seed and the word so repeated lookups agree without any shared
    /// mutable state.
    SeededUniform { seed: u64 },
    Zero,
}

/// Pre-trained word vectors of a fixed dimension.
#[derive(Debug, Clone)]
pub struct WordEmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    oov_policy: OovPolicy,
    /// Duplicate words seen while loading (last occurrence wins).
    pub duplicates: usize,
}

impl WordEmbeddingTable {
    pub fn new(dim: usize, oov_policy: OovPolicy) -> Self {
        WordEmbeddingTable {
            dim,
            entries: HashMap::new(),
            oov_policy,
            duplicates: 0,
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "vector length != table dimension");
        if self.entries.insert(word.into(), vector).is_some() {
            self.duplicates += 1;
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// The stored vector, or the OOV fallback for unknown words.
    pub fn vector(&self, word: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.fill_vector(word, &mut out);
        out
    }

    /// Sorted-vocabulary digest, recorded in checkpoints so a model is not
    /// silently evaluated against different tables.
    pub fn vocab_hash(&self) -> u64 {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        let mut h: u64 = 0xcbf29ce484222325;
        for w in words {
            h ^= fnv1a64(w.as_bytes());
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Anything that can produce a d-dimensional row for a token.
pub trait WordVectors {
    fn dim(&self) -> usize;
    fn fill_vector(&self, word: &str, out: &mut [f64]);
}

impl WordVectors for WordEmbeddingTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fill_vector(&self, word: &str, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        if let Some(v) = self.entries.get(word) {
            out.copy_from_slice(v);
            return;
        }
        match self.oov_policy {
            OovPolicy::Zero => out.fill(0.0),
            OovPolicy::SeededUniform { seed } => {
                let mut rng = Rng::new(seed ^ fnv1a64(word.as_bytes()));
                for x in out.iter_mut() {
                    *x = rng.uniform(-0.25, 0.25);
                }
            }
        }
    }
}

/// Loads a textual embedding file. The table contains exactly the declared
/// vocabulary; duplicate words are counted and the last occurrence wins.
pub fn load_word_embeddings(path: &Path, oov_seed: u64) -> Result<WordEmbeddingTable> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse(&display, 1, "empty embedding file"))?;
    let header = header.map_err(|e| Error::io(&display, e))?;
    let mut parts = header.split_whitespace();
    let vocab: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::parse(&display, 1, "header must be `V d`"))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| Error::parse(&display, 1, "header must be `V d` with d > 0"))?;

    let mut table = WordEmbeddingTable::new(dim, OovPolicy::SeededUniform { seed: oov_seed });
    let mut rows = 0usize;
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if rows == vocab {
            return Err(Error::parse(
                &display,
                lineno,
                format!("more rows than the declared vocabulary of {vocab}"),
            ));
        }
        let mut parts = line.split_whitespace();
        let word = parts.next().unwrap();
        let mut vector = Vec::with_capacity(dim);
        for p in parts {
            let v: f64 = p.parse().map_err(|_| {
                Error::parse(&display, lineno, format!("non-numeric value `{p}`"))
            })?;
            vector.push(v);
        }
        if vector.len() != dim {
            return Err(Error::parse(
                &display,
                lineno,
                format!("expected {dim} values, found {}", vector.len()),
            ));
        }
        table.insert(word, vector);
        rows += 1;
    }
    if rows != vocab {
        return Err(Error::Data(format!(
            "{display}: declared vocabulary of {vocab} but found {rows} rows"
        )));
    }
    Ok(table)
}

/// One parsed lexicon source: a name and word → scores rows.
#[derive(Debug, Clone)]
pub struct LexiconSource {
    pub name: String,
    pub score_count: usize,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl LexiconSource {
    pub fn from_rows(name: impl Into<String>, rows: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let name = name.into();
        let score_count = match rows.first() {
            Some((_, scores)) => scores.len(),
            None => return Err(Error::Data(format!("lexicon source `{name}` is empty"))),
        };
        for (word, scores) in &rows {
            if scores.len() != score_count {
                return Err(Error::Data(format!(
                    "lexicon source `{name}`: `{word}` has {} scores, expected {score_count}",
                    scores.len()
                )));
            }
        }
        Ok(LexiconSource {
            name,
            score_count,
            rows,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let display = path.display().to_string();
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| display.clone());
        let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
        let mut rows = Vec::new();
        let mut score_count: Option<usize> = None;
        for (idx, line) in BufReader::new(file).lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::io(&display, e))?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split('\t');
            let word = parts.next().unwrap().to_string();
            let mut scores = Vec::new();
            for p in parts {
                let v: f64 = p.parse().map_err(|_| {
                    Error::parse(&display, lineno, format!("non-numeric score `{p}`"))
                })?;
                scores.push(v);
            }
            if scores.is_empty() {
                return Err(Error::parse(&display, lineno, "row has no scores"));
            }
            match score_count {
                None => score_count = Some(scores.len()),
                Some(c) if c != scores.len() => {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("inconsistent score count: {} vs {c}", scores.len()),
                    ));
                }
                Some(_) => {}
            }
            rows.push((word, scores));
        }
        if rows.is_empty() {
            return Err(Error::Data(format!("lexicon source `{display}` is empty")));
        }
        Ok(LexiconSource {
            name,
            score_count: score_count.unwrap(),
            rows,
        })
    }
}

/// Word → concatenated sentiment scores in `[-1, 1]`, with per-source
/// column spans. Missing words map to the all-zero vector.
#[derive(Debug, Clone)]
pub struct LexiconTable {
    width: usize,
    spans: Vec<(String, Range<usize>)>,
    entries: HashMap<String, Vec<f64>>,
}

impl LexiconTable {
    /// A table with no sources (width 0). Useful as the degenerate lexicon:
    /// concatenating zero scores leaves word vectors unchanged.
    pub fn empty() -> Self {
        LexiconTable {
            width: 0,
            spans: Vec::new(),
            entries: HashMap::new(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn spans(&self) -> &[(String, Range<usize>)] {
        &self.spans
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    /// The stored vector, or all zeros for unknown words. Length is always
    /// the table width.
    pub fn vector(&self, word: &str) -> Vec<f64> {
        self.entries
            .get(word)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.width])
    }

    pub fn fill_vector(&self, word: &str, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.width);
        match self.entries.get(word) {
            Some(v) => out.copy_from_slice(v),
            None => out.fill(0.0),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn vocab_hash(&self) -> u64 {
        let mut words: Vec<&str> = self.entries.keys().map(String::as_str).collect();
        words.sort_unstable();
        let mut h: u64 = 0xcbf29ce484222325;
        for w in words {
            h ^= fnv1a64(w.as_bytes());
            h = h.wrapping_mul(0x100000001b3);
        }
        h
    }
}

/// Builds a lexicon table from parsed sources, in the given order.
pub fn build_lexicon_table_from_sources(sources: &[LexiconSource]) -> Result<LexiconTable> {
    if sources.is_empty() {
        return Err(Error::Data("no lexicon sources given".to_string()));
    }
    let width: usize = sources.iter().map(|s| s.score_count).sum();
    let mut spans = Vec::with_capacity(sources.len());
    let mut entries: HashMap<String, Vec<f64>> = HashMap::new();
    let mut start = 0usize;
    for source in sources {
        let range = start..start + source.score_count;
        spans.push((source.name.clone(), range.clone()));
        start = range.end;

        let normalized = normalize_columns(source);
        for (word, scores) in normalized {
            let entry = entries
                .entry(word)
                .or_insert_with(|| vec![0.0; width]);
            entry[range.clone()].copy_from_slice(&scores);
        }
    }
    Ok(LexiconTable {
        width,
        spans,
        entries,
    })
}

/// Loads each source file and concatenates, in argument order.
pub fn build_lexicon_table(paths: &[impl AsRef<Path>]) -> Result<LexiconTable> {
    let sources = paths
        .iter()
        .map(|p| LexiconSource::load(p.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    build_lexicon_table_from_sources(&sources)
}

/// Per-column min-max rescaling to [-1, 1], applied only to columns whose
/// observed values leave that range. Within a source, a later duplicate of
/// a word overrides an earlier one.
fn normalize_columns(source: &LexiconSource) -> Vec<(String, Vec<f64>)> {
    let cols = source.score_count;
    let mut needs = vec![false; cols];
    let mut mins = vec![f64::INFINITY; cols];
    let mut maxs = vec![f64::NEG_INFINITY; cols];
    for (_, scores) in &source.rows {
        for (c, &v) in scores.iter().enumerate() {
            if !(-1.0..=1.0).contains(&v) {
                needs[c] = true;
            }
            mins[c] = mins[c].min(v);
            maxs[c] = maxs[c].max(v);
        }
    }
    source
        .rows
        .iter()
        .map(|(word, scores)| {
            let rescaled = scores
                .iter()
                .enumerate()
                .map(|(c, &v)| {
                    if !needs[c] {
                        v
                    } else if maxs[c] > mins[c] {
                        2.0 * (v - mins[c]) / (maxs[c] - mins[c]) - 1.0
                    } else {
                        0.0
                    }
                })
                .collect();
            (word.clone(), rescaled)
        })
        .collect()
}

/// Percentage of a dataset's word types present in a vocabulary. Fallback
/// vectors (OOV draws, zero lexicon vectors) do not count as coverage.
pub fn coverage<F: Fn(&str) -> bool>(contains: F, ds: &Dataset) -> Result<f64> {
    let types = ds.word_types();
    if types.is_empty() {
        return Err(Error::Data("coverage of an empty dataset".to_string()));
    }
    let covered = types.iter().filter(|t| contains(t)).count();
    Ok(100.0 * covered as f64 / types.len() as f64)
}

// --- serialized lexicon tables ---------------------------------------------

const LEXICON_TABLE_MAGIC: &str = "lexcnn-lexicon-table v1";

/// Writes a built table to a single self-describing text file.
pub fn save_lexicon_table(table: &LexiconTable, header: &str, path: &Path) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::new();
    out.push_str(header);
    out.push_str(LEXICON_TABLE_MAGIC);
    out.push('\n');
    let _ = writeln!(out, "width\t{}", table.width);
    for (name, range) in &table.spans {
        let _ = writeln!(out, "span\t{name}\t{}\t{}", range.start, range.end);
    }
    let mut words: Vec<&String> = table.entries.keys().collect();
    words.sort_unstable();
    for word in words {
        let _ = write!(out, "entry\t{word}");
        for v in &table.entries[word] {
            let _ = write!(out, "\t{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_lexicon_table(path: &Path) -> Result<LexiconTable> {
    let display = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|e| Error::io(&display, e))?;
    let mut width = None;
    let mut spans = Vec::new();
    let mut entries = HashMap::new();
    let mut saw_magic = false;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(&display, e))?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_magic {
            if line != LEXICON_TABLE_MAGIC {
                return Err(Error::parse(&display, lineno, "not a lexicon table file"));
            }
            saw_magic = true;
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        match fields[0] {
            "width" => {
                width = Some(fields.get(1).and_then(|s| s.parse().ok()).ok_or_else(
                    || Error::parse(&display, lineno, "bad width line"),
                )?);
            }
            "span" => {
                if fields.len() != 4 {
                    return Err(Error::parse(&display, lineno, "bad span line"));
                }
                let start: usize = fields[2]
                    .parse()
                    .map_err(|_| Error::parse(&display, lineno, "bad span start"))?;
                let end: usize = fields[3]
                    .parse()
                    .map_err(|_| Error::parse(&display, lineno, "bad span end"))?;
                spans.push((fields[1].to_string(), start..end));
            }
            "entry" => {
                let w = width
                    .ok_or_else(|| Error::parse(&display, lineno, "entry before width"))?;
                if fields.len() != w + 2 {
                    return Err(Error::parse(
                        &display,
                        lineno,
                        format!("expected {w} values, found {}", fields.len() - 2),
                    ));
                }
                let mut vector = Vec::with_capacity(w);
                for p in &fields[2..] {
                    vector.push(p.parse().map_err(|_| {
                        Error::parse(&display, lineno, format!("non-numeric value `{p}`"))
                    })?);
                }
                entries.insert(fields[1].to_string(), vector);
            }
            other => {
                return Err(Error::parse(
                    &display,
                    lineno,
                    format!("unknown record `{other}`"),
                ));
            }
        }
    }
    let width = width.ok_or_else(|| Error::Data(format!("{display}: missing width")))?;
    Ok(LexiconTable {
        width,
        spans,
        entries,
    })
}

// --- document matrices ------------------------------------------------------

/// Per-document input matrices. `word_matrix` rows are embedding lookups
/// (the full `d + e` concatenation in NC mode); `lexicon_matrix` is the
/// `n × e` lexicon-score matrix where a separate lexicon channel exists
/// (MC, SC). Documents shorter than `pad_to` get trailing all-zero rows in
/// both matrices so every filter length has at least one window.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentMatrices {
    pub tokens: Vec<String>,
    pub word_matrix: Matrix,
    pub lexicon_matrix: Option<Matrix>,
    pub padding_rows: usize,
}

impl DocumentMatrices {
    /// Number of real (non-padding) token rows.
    pub fn token_count(&self) -> usize {
        self.tokens.len()
    }
}

pub fn document_matrices<W: WordVectors>(
    doc: &Document,
    words: &W,
    lexicon: Option<&LexiconTable>,
    mode: Mode,
    pad_to: usize,
) -> Result<DocumentMatrices> {
    if doc.tokens.is_empty() {
        return Err(Error::Data(format!("document `{}` has no tokens", doc.id)));
    }
    let d = words.dim();
    let n = doc.tokens.len();
    let rows = n.max(pad_to);

    let lex = match mode {
        Mode::Base => None,
        Mode::Nc | Mode::Mc | Mode::Sc => Some(lexicon.ok_or_else(|| {
            Error::Config(format!("{mode} mode requires a lexicon table"))
        })?),
    };
    let e = lex.map_or(0, |t| t.width());
    if mode == Mode::Mc && e > d {
        return Err(Error::Config(format!(
            "lexicon width exceeds embedding width ({e} > {d})"
        )));
    }

    let word_width = if mode == Mode::Nc { d + e } else { d };
    let mut word_matrix = Matrix::zeros(rows, word_width);
    for (i, token) in doc.tokens.iter().enumerate() {
        let row = word_matrix.row_mut(i);
        words.fill_vector(token, &mut row[..d]);
        if mode == Mode::Nc {
            lex.unwrap().fill_vector(token, &mut row[d..]);
        }
    }

    let lexicon_matrix = match mode {
        Mode::Mc | Mode::Sc => {
            let table = lex.unwrap();
            let mut m = Matrix::zeros(rows, e);
            for (i, token) in doc.tokens.iter().enumerate() {
                table.fill_vector(token, m.row_mut(i));
            }
            Some(m)
        }
        Mode::Base | Mode::Nc => None,
    };

    Ok(DocumentMatrices {
        tokens: doc.tokens.clone(),
        word_matrix,
        lexicon_matrix,
        padding_rows: rows - n,
    })
}
