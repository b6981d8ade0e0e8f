//! Forward pass: convolution, pooling, embedding attention, softmax.

use crate::embeddings::DocumentMatrices;
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::model::{AttentionBlock, ConvBlock, ModelConfig, ModelParameters, Mode, SoftmaxLayer};
use crate::rng::Rng;

/// Per-token attention weights kept for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionRecord {
    pub tokens: Vec<String>,
    pub word_weights: Vec<f64>,
    pub lexicon_weights: Option<Vec<f64>>,
}

/// Cached pooling decision for one filter.
#[derive(Debug, Clone)]
pub(crate) struct PoolCache {
    pub argmax: usize,
    pub pre_activation: f64,
}

/// Cached attention intermediates for one embedding space.
#[derive(Debug, Clone)]
pub(crate) struct AttnCache {
    pub v_a: Vec<f64>,
    pub argmax_filter: Vec<usize>,
    pub v_e: Vec<f64>,
}

/// Output of a forward evaluation plus everything backward needs.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub class_probabilities: Vec<f64>,
    /// The feature vector the softmax saw (after dropout, when active).
    pub penultimate: Vec<f64>,
    pub attention: Option<AttentionRecord>,
    pub(crate) matrices: DocumentMatrices,
    pub(crate) word_pool: Vec<PoolCache>,
    pub(crate) lex_pool: Vec<PoolCache>,
    pub(crate) word_attn: Option<AttnCache>,
    pub(crate) lex_attn: Option<AttnCache>,
    pub(crate) dropout_mask: Option<Vec<f64>>,
}

impl ForwardTrace {
    /// Argmax class; ties break toward the lowest index.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_probabilities.iter().enumerate() {
            if p > self.class_probabilities[best] {
                best = i;
            }
        }
        best
    }
}

fn relu(x: f64) -> f64 {
    x.max(0.0)
}

/// Pre-activation of one window: rows `j .. j+l` of `s`, restricted to the
/// first `take` columns of each filter row of (stored) width `filter_width`.
fn window_preact(
    s: &Matrix,
    filter: &[f64],
    l: usize,
    filter_width: usize,
    take: usize,
    j: usize,
) -> f64 {
    let mut acc = 0.0;
    for r in 0..l {
        let row = s.row(j + r);
        let f = &filter[r * filter_width..r * filter_width + take];
        acc += dot(&row[..take], f);
    }
    acc
}

/// Rectified responses of every filter in the block over `s`: one vector of
/// length `n - l + 1` per filter, lengths-major then filter index.
pub fn conv_forward(s: &Matrix, block: &ConvBlock) -> Result<Vec<Vec<f64>>> {
    if s.cols() != block.width {
        return Err(Error::Config(format!(
            "matrix width {} does not match filter width {}",
            s.cols(),
            block.width
        )));
    }
    let n = s.rows();
    let mut out = Vec::with_capacity(block.total_filters());
    for (li, &l) in block.filter_lengths.iter().enumerate() {
        if n < l {
            return Err(Error::Data(format!(
                "document of {n} rows is shorter than filter length {l}"
            )));
        }
        for k in 0..block.filters_per_length {
            let filter = block.filter(li, k);
            let bias = block.bias(li, k);
            let mut v = Vec::with_capacity(n - l + 1);
            for j in 0..=n - l {
                v.push(relu(window_preact(s, filter, l, block.width, block.width, j) + bias));
            }
            out.push(v);
        }
    }
    Ok(out)
}

/// Maximum element and its index; ties break toward the lowest index.
pub fn global_max_pool(v: &[f64]) -> Result<(f64, usize)> {
    if v.is_empty() {
        return Err(Error::Data("max pooling over an empty vector".into()));
    }
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    Ok((v[best], best))
}

/// The attention vector and attention output for one embedding space:
/// `v_a[i]` is the row-wise max over tanh responses of the length-1 filters,
/// and `v_e = sᵀ · v_a`.
pub fn embedding_attention(s: &Matrix, block: &AttentionBlock) -> (Vec<f64>, Vec<f64>) {
    let cache = attention_cached(s, block);
    (cache.v_a, cache.v_e)
}

pub(crate) fn attention_cached(s: &Matrix, block: &AttentionBlock) -> AttnCache {
    debug_assert_eq!(s.cols(), block.filters.cols());
    let n = s.rows();
    let m = block.filter_count();
    let mut v_a = Vec::with_capacity(n);
    let mut argmax_filter = Vec::with_capacity(n);
    for i in 0..n {
        let row = s.row(i);
        let mut best_k = 0;
        let mut best = f64::NEG_INFINITY;
        for k in 0..m {
            let z = (dot(row, block.filters.row(k)) + block.biases[k]).tanh();
            if z > best {
                best = z;
                best_k = k;
            }
        }
        v_a.push(best);
        argmax_filter.push(best_k);
    }
    let v_e = attention_output(s, &v_a);
    AttnCache {
        v_a,
        argmax_filter,
        v_e,
    }
}

/// `sᵀ · v_a`: the attention-weighted sum of token rows.
pub fn attention_output(s: &Matrix, v_a: &[f64]) -> Vec<f64> {
    debug_assert_eq!(s.rows(), v_a.len());
    let mut v_e = vec![0.0; s.cols()];
    for (i, &a) in v_a.iter().enumerate() {
        for (w, &x) in s.row(i).iter().enumerate() {
            v_e[w] += x * a;
        }
    }
    v_e
}

/// Numerically stable softmax over the affine layer outputs.
pub fn softmax_probs(layer: &SoftmaxLayer, penultimate: &[f64]) -> Vec<f64> {
    let classes = layer.biases.len();
    let mut logits = layer.biases.clone();
    for (i, &x) in penultimate.iter().enumerate() {
        let row = layer.weights.row(i);
        for c in 0..classes {
            logits[c] += x * row[c];
        }
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut probs: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Feeds one document through the model.
pub fn forward(
    dm: DocumentMatrices,
    p: &ModelParameters,
    cfg: &ModelConfig,
) -> Result<ForwardTrace> {
    forward_impl(dm, p, cfg, None)
}

/// Training-time forward: zeroes each penultimate element with probability
/// `rate` and scales survivors by `1/(1-rate)`.
pub fn forward_with_dropout(
    dm: DocumentMatrices,
    p: &ModelParameters,
    cfg: &ModelConfig,
    rng: &mut Rng,
    rate: f64,
) -> Result<ForwardTrace> {
    forward_impl(dm, p, cfg, Some((rng, rate)))
}

fn pool_block(
    s: &Matrix,
    block: &ConvBlock,
    second_channel: Option<(&Matrix, usize)>,
    features: &mut Vec<f64>,
    caches: &mut Vec<PoolCache>,
) -> Result<()> {
    let n = s.rows();
    for (li, &l) in block.filter_lengths.iter().enumerate() {
        if n < l {
            return Err(Error::Data(format!(
                "document of {n} rows is shorter than filter length {l}"
            )));
        }
        for k in 0..block.filters_per_length {
            let filter = block.filter(li, k);
            let bias = block.bias(li, k);
            let mut best_j = 0;
            let mut best_z = f64::NEG_INFINITY;
            let mut best_v = f64::NEG_INFINITY;
            for j in 0..=n - l {
                let mut z = window_preact(s, filter, l, block.width, block.width, j) + bias;
                if let Some((x, take)) = second_channel {
                    z += window_preact(x, filter, l, block.width, take, j);
                }
                let v = relu(z);
                if v > best_v {
                    best_v = v;
                    best_z = z;
                    best_j = j;
                }
            }
            features.push(best_v);
            caches.push(PoolCache {
                argmax: best_j,
                pre_activation: best_z,
            });
        }
    }
    Ok(())
}

fn forward_impl(
    dm: DocumentMatrices,
    p: &ModelParameters,
    cfg: &ModelConfig,
    dropout: Option<(&mut Rng, f64)>,
) -> Result<ForwardTrace> {
    if *cfg != p.config {
        return Err(Error::Config(
            "model parameters were built for a different configuration".into(),
        ));
    }
    let word_width = cfg.word_width(p.d, p.e);
    if dm.word_matrix.cols() != word_width {
        return Err(Error::Config(format!(
            "word matrix width {} does not match the {} model width {word_width}",
            dm.word_matrix.cols(),
            cfg.mode
        )));
    }
    match (cfg.mode, &dm.lexicon_matrix) {
        (Mode::Mc | Mode::Sc, None) => {
            return Err(Error::Config(format!(
                "{} mode requires a lexicon matrix",
                cfg.mode
            )));
        }
        (Mode::Mc | Mode::Sc, Some(x)) if x.cols() != p.e => {
            return Err(Error::Config(format!(
                "lexicon matrix width {} does not match the model width {}",
                x.cols(),
                p.e
            )));
        }
        _ => {}
    }
    if cfg.mode == Mode::Mc && p.e > p.d {
        return Err(Error::Config(format!(
            "lexicon width exceeds embedding width ({} > {})",
            p.e, p.d
        )));
    }

    let mut penultimate = Vec::with_capacity(cfg.penultimate_size(p.d, p.e));
    let mut word_pool = Vec::with_capacity(p.word_conv.total_filters());
    let mut lex_pool = Vec::new();

    let second = match cfg.mode {
        Mode::Mc => Some((dm.lexicon_matrix.as_ref().unwrap(), p.e)),
        _ => None,
    };
    pool_block(
        &dm.word_matrix,
        &p.word_conv,
        second,
        &mut penultimate,
        &mut word_pool,
    )?;
    if let Some(lex_conv) = &p.lex_conv {
        let x = dm.lexicon_matrix.as_ref().unwrap();
        pool_block(x, lex_conv, None, &mut penultimate, &mut lex_pool)?;
    }

    let word_attn = p
        .word_attn
        .as_ref()
        .map(|block| attention_cached(&dm.word_matrix, block));
    let lex_attn = p
        .lex_attn
        .as_ref()
        .map(|block| attention_cached(dm.lexicon_matrix.as_ref().unwrap(), block));
    if let Some(a) = &word_attn {
        penultimate.extend_from_slice(&a.v_e);
    }
    if let Some(a) = &lex_attn {
        penultimate.extend_from_slice(&a.v_e);
    }

    if penultimate.len() != p.softmax.weights.rows() {
        return Err(Error::Config(format!(
            "penultimate size {} does not match softmax input {}",
            penultimate.len(),
            p.softmax.weights.rows()
        )));
    }

    let dropout_mask = dropout.and_then(|(rng, rate)| {
        if rate <= 0.0 {
            return None;
        }
        let keep = 1.0 - rate;
        let mask: Vec<f64> = penultimate
            .iter()
            .map(|_| if rng.next_f64() < rate { 0.0 } else { 1.0 / keep })
            .collect();
        for (x, m) in penultimate.iter_mut().zip(&mask) {
            *x *= m;
        }
        Some(mask)
    });

    let class_probabilities = softmax_probs(&p.softmax, &penultimate);
    debug_assert!(
        (class_probabilities.iter().sum::<f64>() - 1.0).abs() < 1e-9,
        "softmax does not sum to 1"
    );

    let n_real = dm.tokens.len();
    let attention = word_attn.as_ref().map(|w| AttentionRecord {
        tokens: dm.tokens.clone(),
        word_weights: w.v_a[..n_real].to_vec(),
        lexicon_weights: lex_attn.as_ref().map(|x| x.v_a[..n_real].to_vec()),
    });

    Ok(ForwardTrace {
        class_probabilities,
        penultimate,
        attention,
        matrices: dm,
        word_pool,
        lex_pool,
        word_attn,
        lex_attn,
        dropout_mask,
    })
}
