//! Model variants, parameters and the forward/backward passes.
//!
//! Four integration modes share one architecture: convolution filters of
//! several lengths slide over the document matrix, each filter's response
//! is rectified and globally max-pooled to one feature, the pooled features
//! (plus optional embedding attention vectors) form the penultimate layer,
//! and an affine softmax produces class probabilities. Gradients are exact
//! and hand-written; max pooling routes its gradient to the argmax index
//! and rectification uses the zero subgradient at 0.

mod backward;
mod checkpoint;
mod forward;

pub use backward::{accumulate_gradients, loss_and_gradients};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
pub use forward::{
    attention_output, conv_forward, embedding_attention, forward, forward_with_dropout,
    global_max_pool, softmax_probs, AttentionRecord, ForwardTrace,
};

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;

use crate::embeddings::{WordEmbeddingTable, WordVectors};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

/// Lexicon integration mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Word embeddings only.
    Base,
    /// Naive concatenation: lexicon scores appended to each word vector.
    Nc,
    /// Multichannel: lexicon vectors zero-padded to the word width and
    /// convolved as a second channel with the same filters.
    Mc,
    /// Separate convolution stacks over the word and lexicon matrices.
    Sc,
}

impl Mode {
    pub fn uses_lexicon(&self) -> bool {
        !matches!(self, Mode::Base)
    }

    pub fn parse(s: &str) -> Result<Mode> {
        match s {
            "base" => Ok(Mode::Base),
            "nc" => Ok(Mode::Nc),
            "mc" => Ok(Mode::Mc),
            "sc" => Ok(Mode::Sc),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Base => write!(f, "base"),
            Mode::Nc => write!(f, "nc"),
            Mode::Mc => write!(f, "mc"),
            Mode::Sc => write!(f, "sc"),
        }
    }
}

/// Parses a variant name like `sc-eav` into a mode and the attention flag.
pub fn parse_variant(s: &str) -> Result<(Mode, bool)> {
    match s.strip_suffix("-eav") {
        Some(prefix) => Ok((Mode::parse(prefix)?, true)),
        None => Ok((Mode::parse(s)?, false)),
    }
}

pub fn variant_name(mode: Mode, eav: bool) -> String {
    if eav {
        format!("{mode}-eav")
    } else {
        mode.to_string()
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub mode: Mode,
    pub eav: bool,
    pub word_filter_lengths: Vec<usize>,
    pub lex_filter_lengths: Vec<usize>,
    /// Filters per length over the word (or concatenated) matrix.
    pub word_filters: usize,
    /// Filters per length over the lexicon matrix (SC only).
    pub lex_filters: usize,
    /// Length-1 attention filters in the word embedding space.
    pub word_attn_filters: usize,
    /// Length-1 attention filters in the lexicon embedding space.
    pub lex_attn_filters: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            mode: Mode::Base,
            eav: false,
            word_filter_lengths: vec![2, 3, 4, 5],
            lex_filter_lengths: vec![2, 3, 4, 5],
            word_filters: 64,
            lex_filters: 9,
            word_attn_filters: 50,
            lex_attn_filters: 20,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.word_filter_lengths.is_empty() || self.word_filter_lengths.contains(&0) {
            return Err(Error::Config("word filter lengths must be positive".into()));
        }
        if self.mode == Mode::Sc
            && (self.lex_filter_lengths.is_empty() || self.lex_filter_lengths.contains(&0))
        {
            return Err(Error::Config("lexicon filter lengths must be positive".into()));
        }
        if self.word_filters == 0 || (self.mode == Mode::Sc && self.lex_filters == 0) {
            return Err(Error::Config("filter counts must be positive".into()));
        }
        if self.eav && self.word_attn_filters == 0 {
            return Err(Error::Config("attention filter counts must be positive".into()));
        }
        if self.eav && self.has_lexicon_attention() && self.lex_attn_filters == 0 {
            return Err(Error::Config("attention filter counts must be positive".into()));
        }
        Ok(())
    }

    /// Whether a separate lexicon-space attention exists. In NC mode there
    /// is only one matrix, so one attention vector covers it.
    pub fn has_lexicon_attention(&self) -> bool {
        self.eav && matches!(self.mode, Mode::Mc | Mode::Sc)
    }

    /// Width of the word matrix: `d`, or `d + e` under naive concatenation.
    pub fn word_width(&self, d: usize, e: usize) -> usize {
        if self.mode == Mode::Nc {
            d + e
        } else {
            d
        }
    }

    /// Documents are padded to at least this many rows so that every active
    /// filter has one full window.
    pub fn pad_to(&self) -> usize {
        let word_max = self.word_filter_lengths.iter().copied().max().unwrap_or(1);
        let lex_max = if self.mode == Mode::Sc {
            self.lex_filter_lengths.iter().copied().max().unwrap_or(1)
        } else {
            1
        };
        word_max.max(lex_max)
    }

    /// Size of the feature vector feeding the softmax layer.
    pub fn penultimate_size(&self, d: usize, e: usize) -> usize {
        let mut size = self.word_filters * self.word_filter_lengths.len();
        if self.mode == Mode::Sc {
            size += self.lex_filters * self.lex_filter_lengths.len();
        }
        if self.eav {
            size += self.word_width(d, e);
            if self.has_lexicon_attention() {
                size += e;
            }
        }
        size
    }
}

/// A bank of convolution filters grouped by length; all filters of length
/// `l` share the shape `l × width` and are stored flattened row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    pub filter_lengths: Vec<usize>,
    pub filters_per_length: usize,
    pub width: usize,
    /// One matrix per filter length: `filters_per_length × (l * width)`.
    pub weights: Vec<Matrix>,
    /// One bias per filter, indexed `length_index * filters_per_length + k`.
    pub biases: Vec<f64>,
}

impl ConvBlock {
    pub fn init(
        filter_lengths: Vec<usize>,
        filters_per_length: usize,
        width: usize,
        rng: &mut Rng,
        scale: f64,
    ) -> Self {
        let weights = filter_lengths
            .iter()
            .map(|&l| {
                let mut m = Matrix::zeros(filters_per_length, l * width);
                for v in m.data_mut() {
                    *v = rng.uniform(-scale, scale);
                }
                m
            })
            .collect();
        let biases = vec![0.0; filters_per_length * filter_lengths.len()];
        ConvBlock {
            filter_lengths,
            filters_per_length,
            width,
            weights,
            biases,
        }
    }

    pub fn filter(&self, length_index: usize, k: usize) -> &[f64] {
        self.weights[length_index].row(k)
    }

    pub fn bias(&self, length_index: usize, k: usize) -> f64 {
        self.biases[length_index * self.filters_per_length + k]
    }

    pub fn total_filters(&self) -> usize {
        self.filters_per_length * self.filter_lengths.len()
    }

    fn zeros_like(&self) -> ConvBlock {
        ConvBlock {
            filter_lengths: self.filter_lengths.clone(),
            filters_per_length: self.filters_per_length,
            width: self.width,
            weights: self
                .weights
                .iter()
                .map(|m| Matrix::zeros(m.rows(), m.cols()))
                .collect(),
            biases: vec![0.0; self.biases.len()],
        }
    }
}

/// Length-1 filters that score each token row; the row-wise max of their
/// tanh responses is the attention vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionBlock {
    /// `filters × width`
    pub filters: Matrix,
    pub biases: Vec<f64>,
}

impl AttentionBlock {
    pub fn init(filters: usize, width: usize, rng: &mut Rng, scale: f64) -> Self {
        let mut m = Matrix::zeros(filters, width);
        for v in m.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
        AttentionBlock {
            filters: m,
            biases: vec![0.0; filters],
        }
    }

    pub fn filter_count(&self) -> usize {
        self.filters.rows()
    }

    fn zeros_like(&self) -> AttentionBlock {
        AttentionBlock {
            filters: Matrix::zeros(self.filters.rows(), self.filters.cols()),
            biases: vec![0.0; self.biases.len()],
        }
    }
}

/// Affine softmax layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxLayer {
    /// `penultimate × classes`
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl SoftmaxLayer {
    pub fn init(penultimate: usize, classes: usize, rng: &mut Rng, scale: f64) -> Self {
        let mut m = Matrix::zeros(penultimate, classes);
        for v in m.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
        SoftmaxLayer {
            weights: m,
            biases: vec![0.0; classes],
        }
    }

    fn zeros_like(&self) -> SoftmaxLayer {
        SoftmaxLayer {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            biases: vec![0.0; self.biases.len()],
        }
    }
}

/// Fine-tuned copies of the embedding rows for a training vocabulary.
/// Lookups outside the vocabulary fall back to the base table.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedEmbeddings {
    dim: usize,
    words: Vec<String>,
    index: HashMap<String, usize>,
    pub matrix: Matrix,
}

impl TunedEmbeddings {
    /// Copies the base vector (or its OOV fallback) for each word. Words are
    /// sorted so the row order is canonical.
    pub fn from_vocab(mut words: Vec<String>, base: &WordEmbeddingTable) -> Self {
        words.sort_unstable();
        words.dedup();
        let dim = base.dim();
        let mut matrix = Matrix::zeros(words.len(), dim);
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            base.fill_vector(w, matrix.row_mut(i));
            index.insert(w.clone(), i);
        }
        TunedEmbeddings {
            dim,
            words,
            index,
            matrix,
        }
    }

    /// Rebuilds a table from an explicit row order (checkpoint loading).
    pub(crate) fn from_parts(words: Vec<String>, matrix: Matrix) -> Self {
        assert_eq!(words.len(), matrix.rows());
        let index = words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
        TunedEmbeddings {
            dim: matrix.cols(),
            words,
            index,
            matrix,
        }
    }

    pub fn row_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn zeros_like(&self) -> TunedEmbeddings {
        TunedEmbeddings {
            dim: self.dim,
            words: self.words.clone(),
            index: self.index.clone(),
            matrix: Matrix::zeros(self.matrix.rows(), self.matrix.cols()),
        }
    }
}

/// Word lookup that prefers tuned rows and falls back to the base table.
pub struct TunedView<'a> {
    pub tuned: &'a TunedEmbeddings,
    pub base: &'a WordEmbeddingTable,
}

impl WordVectors for TunedView<'_> {
    fn dim(&self) -> usize {
        self.tuned.dim
    }

    fn fill_vector(&self, word: &str, out: &mut [f64]) {
        match self.tuned.row_of(word) {
            Some(i) => out.copy_from_slice(self.tuned.matrix.row(i)),
            None => self.base.fill_vector(word, out),
        }
    }
}

/// All trainable tensors of one model. The same struct doubles as the
/// gradient container (`zeros_like` + `add_scaled`), which keeps the
/// optimizer and the finite-difference checks aligned with one canonical
/// flattening order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParameters {
    pub config: ModelConfig,
    pub d: usize,
    pub e: usize,
    pub classes: usize,
    pub word_conv: ConvBlock,
    pub lex_conv: Option<ConvBlock>,
    pub word_attn: Option<AttentionBlock>,
    pub lex_attn: Option<AttentionBlock>,
    pub softmax: SoftmaxLayer,
    pub tuned: Option<TunedEmbeddings>,
}

const INIT_SCALE: f64 = 0.05;

impl ModelParameters {
    /// Initializes all weights uniform in [-0.05, 0.05] from `rng`, biases
    /// zero. Draw order is fixed: word conv, lexicon conv, word attention,
    /// lexicon attention, softmax. Tuned embedding rows are copies of the
    /// base table and consume no draws.
    pub fn init(
        config: &ModelConfig,
        d: usize,
        e: usize,
        classes: usize,
        tuned_vocab: Option<(Vec<String>, &WordEmbeddingTable)>,
        rng: &mut Rng,
    ) -> Result<ModelParameters> {
        config.validate()?;
        if config.mode == Mode::Mc && e > d {
            return Err(Error::Config(format!(
                "lexicon width exceeds embedding width ({e} > {d})"
            )));
        }
        if config.mode.uses_lexicon() && e == 0 && config.mode != Mode::Nc {
            return Err(Error::Config(format!(
                "{} mode requires a lexicon table with at least one column",
                config.mode
            )));
        }
        if classes < 2 {
            return Err(Error::Config("need at least two classes".into()));
        }

        let word_width = config.word_width(d, e);
        let word_conv = ConvBlock::init(
            config.word_filter_lengths.clone(),
            config.word_filters,
            word_width,
            rng,
            INIT_SCALE,
        );
        let lex_conv = (config.mode == Mode::Sc).then(|| {
            ConvBlock::init(
                config.lex_filter_lengths.clone(),
                config.lex_filters,
                e,
                rng,
                INIT_SCALE,
            )
        });
        let word_attn = config
            .eav
            .then(|| AttentionBlock::init(config.word_attn_filters, word_width, rng, INIT_SCALE));
        let lex_attn = config
            .has_lexicon_attention()
            .then(|| AttentionBlock::init(config.lex_attn_filters, e, rng, INIT_SCALE));
        let softmax = SoftmaxLayer::init(config.penultimate_size(d, e), classes, rng, INIT_SCALE);
        let tuned = tuned_vocab.map(|(words, base)| TunedEmbeddings::from_vocab(words, base));

        Ok(ModelParameters {
            config: config.clone(),
            d,
            e,
            classes,
            word_conv,
            lex_conv,
            word_attn,
            lex_attn,
            softmax,
            tuned,
        })
    }

    pub fn zeros_like(&self) -> ModelParameters {
        ModelParameters {
            config: self.config.clone(),
            d: self.d,
            e: self.e,
            classes: self.classes,
            word_conv: self.word_conv.zeros_like(),
            lex_conv: self.lex_conv.as_ref().map(ConvBlock::zeros_like),
            word_attn: self.word_attn.as_ref().map(AttentionBlock::zeros_like),
            lex_attn: self.lex_attn.as_ref().map(AttentionBlock::zeros_like),
            softmax: self.softmax.zeros_like(),
            tuned: self.tuned.as_ref().map(TunedEmbeddings::zeros_like),
        }
    }

    fn tensors(&self) -> Vec<(&str, &[f64])> {
        let mut out: Vec<(&str, &[f64])> = Vec::new();
        for m in &self.word_conv.weights {
            out.push(("word_conv.weights", m.data()));
        }
        out.push(("word_conv.biases", &self.word_conv.biases));
        if let Some(b) = &self.lex_conv {
            for m in &b.weights {
                out.push(("lex_conv.weights", m.data()));
            }
            out.push(("lex_conv.biases", &b.biases));
        }
        if let Some(a) = &self.word_attn {
            out.push(("word_attn.weights", a.filters.data()));
            out.push(("word_attn.biases", &a.biases));
        }
        if let Some(a) = &self.lex_attn {
            out.push(("lex_attn.weights", a.filters.data()));
            out.push(("lex_attn.biases", &a.biases));
        }
        out.push(("softmax.weights", self.softmax.weights.data()));
        out.push(("softmax.biases", &self.softmax.biases));
        if let Some(t) = &self.tuned {
            out.push(("embeddings", t.matrix.data()));
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for m in &mut self.word_conv.weights {
            out.push(m.data_mut());
        }
        out.push(&mut self.word_conv.biases);
        if let Some(b) = &mut self.lex_conv {
            for m in &mut b.weights {
                out.push(m.data_mut());
            }
            out.push(&mut b.biases);
        }
        if let Some(a) = &mut self.word_attn {
            out.push(a.filters.data_mut());
            out.push(&mut a.biases);
        }
        if let Some(a) = &mut self.lex_attn {
            out.push(a.filters.data_mut());
            out.push(&mut a.biases);
        }
        out.push(self.softmax.weights.data_mut());
        out.push(&mut self.softmax.biases);
        if let Some(t) = &mut self.tuned {
            out.push(t.matrix.data_mut());
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Concatenates every tensor into one vector, in a fixed order.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (_, t) in self.tensors() {
            out.extend_from_slice(t);
        }
        out
    }

    /// Inverse of [`flatten`](Self::flatten). Panics on length mismatch.
    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for t in self.tensors_mut() {
            t.copy_from_slice(&flat[offset..offset + t.len()]);
            offset += t.len();
        }
        assert_eq!(offset, flat.len(), "flat parameter length mismatch");
    }

    /// Named index ranges into the flattened vector, aggregated per
    /// parameter group.
    pub fn group_spans(&self) -> Vec<(String, Range<usize>)> {
        let mut spans: Vec<(String, Range<usize>)> = Vec::new();
        let mut offset = 0;
        for (name, t) in self.tensors() {
            let range = offset..offset + t.len();
            offset = range.end;
            match spans.last_mut() {
                Some((last, r)) if last == name => r.end = range.end,
                _ => spans.push((name.to_string(), range)),
            }
        }
        spans
    }

    /// `self += scale * other`, tensor by tensor. Shapes must match.
    pub fn add_scaled(&mut self, other: &ModelParameters, scale: f64) {
        let theirs = other.tensors();
        for (mine, (_, t)) in self.tensors_mut().into_iter().zip(theirs) {
            debug_assert_eq!(mine.len(), t.len());
            for (m, v) in mine.iter_mut().zip(t) {
                *m += scale * v;
            }
        }
    }

    /// Multiplies every parameter by `scale`.
    pub fn scale(&mut self, scale: f64) {
        for t in self.tensors_mut() {
            for v in t {
                *v *= scale;
            }
        }
    }

    /// Rounds every parameter through single precision. Used by the f32
    /// storage option.
    pub fn round_to_f32(&mut self) {
        for t in self.tensors_mut() {
            for v in t {
                *v = *v as f32 as f64;
            }
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}
