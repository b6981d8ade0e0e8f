//! Exact gradients of the negative log-likelihood.
//!
//! Max pooling routes its gradient to the cached argmax index, rectification
//! gates on the cached pre-activation (zero subgradient at 0), and the
//! attention row-max routes to the cached argmax filter. Gradients reaching
//! frozen inputs (lexicon matrices, padding rows, base embeddings when
//! fine-tuning is off) are discarded.

use crate::error::{Error, Result};
use crate::matrix::{axpy, dot, Matrix};
use crate::model::forward::{AttnCache, ForwardTrace, PoolCache};
use crate::model::{AttentionBlock, ConvBlock, ModelParameters, Mode};

/// Loss and a fresh gradient container.
pub fn loss_and_gradients(
    trace: &ForwardTrace,
    gold: usize,
    p: &ModelParameters,
) -> Result<(f64, ModelParameters)> {
    let mut grads = p.zeros_like();
    let loss = accumulate_gradients(trace, gold, p, &mut grads, 1.0)?;
    Ok((loss, grads))
}

/// Adds `scale` times this document's gradients into `grads` and returns the
/// unscaled loss. `grads` must be shaped like `p` (see
/// [`ModelParameters::zeros_like`]).
pub fn accumulate_gradients(
    trace: &ForwardTrace,
    gold: usize,
    p: &ModelParameters,
    grads: &mut ModelParameters,
    scale: f64,
) -> Result<f64> {
    let classes = p.classes;
    if gold >= classes {
        return Err(Error::Data(format!(
            "gold label {gold} out of range for {classes} classes"
        )));
    }
    if trace.class_probabilities.len() != classes
        || trace.penultimate.len() != p.softmax.weights.rows()
        || trace.word_pool.len() != p.word_conv.total_filters()
    {
        return Err(Error::Data(
            "trace is missing cached intermediates for these parameters".into(),
        ));
    }

    let loss = -trace.class_probabilities[gold].ln();

    // softmax layer
    let mut dlogits = trace.class_probabilities.clone();
    dlogits[gold] -= 1.0;
    for d in &mut dlogits {
        *d *= scale;
    }
    let penult = &trace.penultimate;
    let mut dpen = vec![0.0; penult.len()];
    for (i, &x) in penult.iter().enumerate() {
        let w_row = p.softmax.weights.row(i);
        let g_row = grads.softmax.weights.row_mut(i);
        for c in 0..classes {
            g_row[c] += x * dlogits[c];
            dpen[i] += w_row[c] * dlogits[c];
        }
    }
    for (gb, dl) in grads.softmax.biases.iter_mut().zip(&dlogits) {
        *gb += dl;
    }

    if let Some(mask) = &trace.dropout_mask {
        for (g, m) in dpen.iter_mut().zip(mask) {
            *g *= m;
        }
    }

    // split the penultimate gradient into its segments
    let word_matrix = &trace.matrices.word_matrix;
    let lex_matrix = trace.matrices.lexicon_matrix.as_ref();
    let mut dword = Matrix::zeros(word_matrix.rows(), word_matrix.cols());
    let mut offset = 0;

    let word_feats = p.word_conv.total_filters();
    conv_backward(
        word_matrix,
        if p.config.mode == Mode::Mc {
            lex_matrix.map(|x| (x, p.e))
        } else {
            None
        },
        &p.word_conv,
        &trace.word_pool,
        &dpen[offset..offset + word_feats],
        &mut grads.word_conv,
        Some(&mut dword),
    );
    offset += word_feats;

    if let Some(lex_conv) = &p.lex_conv {
        let feats = lex_conv.total_filters();
        conv_backward(
            lex_matrix.expect("sc trace without lexicon matrix"),
            None,
            lex_conv,
            &trace.lex_pool,
            &dpen[offset..offset + feats],
            grads.lex_conv.as_mut().unwrap(),
            None,
        );
        offset += feats;
    }

    if let Some(cache) = &trace.word_attn {
        let width = word_matrix.cols();
        attention_backward(
            word_matrix,
            p.word_attn.as_ref().unwrap(),
            cache,
            &dpen[offset..offset + width],
            grads.word_attn.as_mut().unwrap(),
            Some(&mut dword),
        );
        offset += width;
    }
    if let Some(cache) = &trace.lex_attn {
        attention_backward(
            lex_matrix.expect("attention trace without lexicon matrix"),
            p.lex_attn.as_ref().unwrap(),
            cache,
            &dpen[offset..offset + p.e],
            grads.lex_attn.as_mut().unwrap(),
            None,
        );
        offset += p.e;
    }
    debug_assert_eq!(offset, dpen.len());

    // scatter word-matrix gradients into tuned embedding rows; in NC mode
    // only the first d columns belong to the word embedding
    if let (Some(tuned), Some(gt)) = (&p.tuned, &mut grads.tuned) {
        for (i, token) in trace.matrices.tokens.iter().enumerate() {
            if let Some(row) = tuned.row_of(token) {
                axpy(gt.matrix.row_mut(row), 1.0, &dword.row(i)[..p.d]);
            }
        }
    }

    Ok(loss)
}

fn conv_backward(
    s: &Matrix,
    second_channel: Option<(&Matrix, usize)>,
    block: &ConvBlock,
    caches: &[PoolCache],
    upstream: &[f64],
    grads: &mut ConvBlock,
    mut input_grad: Option<&mut Matrix>,
) {
    let m = block.filters_per_length;
    for (idx, cache) in caches.iter().enumerate() {
        if cache.pre_activation <= 0.0 {
            continue;
        }
        let gz = upstream[idx];
        if gz == 0.0 {
            continue;
        }
        let li = idx / m;
        let k = idx % m;
        let l = block.filter_lengths[li];
        let j = cache.argmax;
        let width = block.width;
        let filter = block.weights[li].row(k);
        let gfilter = grads.weights[li].row_mut(k);
        for r in 0..l {
            let seg = r * width..(r + 1) * width;
            axpy(&mut gfilter[seg.clone()], gz, s.row(j + r));
            if let Some((x, take)) = second_channel {
                axpy(&mut gfilter[r * width..r * width + take], gz, x.row(j + r));
            }
            if let Some(ds) = input_grad.as_deref_mut() {
                axpy(ds.row_mut(j + r), gz, &filter[seg]);
            }
        }
        grads.biases[idx] += gz;
    }
}

fn attention_backward(
    s: &Matrix,
    block: &AttentionBlock,
    cache: &AttnCache,
    dv_e: &[f64],
    grads: &mut AttentionBlock,
    mut input_grad: Option<&mut Matrix>,
) {
    for i in 0..s.rows() {
        let row = s.row(i);
        let a = cache.v_a[i];
        let dv_a = dot(row, dv_e);
        if let Some(ds) = input_grad.as_deref_mut() {
            axpy(ds.row_mut(i), a, dv_e);
        }
        let dz = dv_a * (1.0 - a * a);
        if dz == 0.0 {
            continue;
        }
        let k = cache.argmax_filter[i];
        axpy(grads.filters.row_mut(k), dz, row);
        grads.biases[k] += dz;
        if let Some(ds) = input_grad.as_deref_mut() {
            axpy(ds.row_mut(i), dz, block.filters.row(k));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embeddings::DocumentMatrices;
    use crate::model::forward::forward;
    use crate::model::ModelConfig;
    use crate::rng::Rng;

    fn micro(mode: Mode, eav: bool, seed: u64) -> (ModelParameters, ModelConfig, DocumentMatrices) {
        let cfg = ModelConfig {
            mode,
            eav,
            word_filter_lengths: vec![2, 3],
            lex_filter_lengths: vec![2],
            word_filters: 4,
            lex_filters: 2,
            word_attn_filters: 3,
            lex_attn_filters: 3,
        };
        let p = ModelParameters::init(&cfg, 5, 3, 3, None, &mut Rng::new(seed)).unwrap();
        let mut rng = Rng::new(seed + 1000);
        let word_width = cfg.word_width(5, 3);
        let mut word = Matrix::zeros(7, word_width);
        for v in word.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let lexicon_matrix = matches!(mode, Mode::Mc | Mode::Sc).then(|| {
            let mut x = Matrix::zeros(7, 3);
            for v in x.data_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            x
        });
        let dm = DocumentMatrices {
            tokens: (0..7).map(|i| format!("t{i}")).collect(),
            word_matrix: word,
            lexicon_matrix,
            padding_rows: 0,
        };
        (p, cfg, dm)
    }

    #[test]
    fn uniform_probabilities_give_ln_classes_loss() {
        let (mut p, cfg, dm) = micro(Mode::Base, false, 1);
        p.softmax.weights.fill(0.0);
        p.softmax.biases.fill(0.0);
        let trace = forward(dm, &p, &cfg).unwrap();
        let (loss, _) = loss_and_gradients(&trace, 0, &p).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn certain_gold_means_zero_loss_and_zero_softmax_gradient() {
        let (mut p, cfg, dm) = micro(Mode::Base, false, 2);
        p.softmax.biases[1] = 1000.0;
        let trace = forward(dm, &p, &cfg).unwrap();
        assert_eq!(trace.class_probabilities[1], 1.0);
        let (loss, grads) = loss_and_gradients(&trace, 1, &p).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads.softmax.weights.data().iter().all(|&g| g == 0.0));
        assert!(grads.softmax.biases.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn rejects_out_of_range_gold() {
        let (p, cfg, dm) = micro(Mode::Base, false, 3);
        let trace = forward(dm, &p, &cfg).unwrap();
        assert!(loss_and_gradients(&trace, 5, &p).is_err());
    }

    /// Small built-in finite difference sweep; the full per-group check for
    /// every mode lives in the training harness.
    #[test]
    fn gradients_match_finite_differences_on_sc_eav() {
        let (p, cfg, dm) = micro(Mode::Sc, true, 4);
        let gold = 2;
        fd_check(p, cfg, dm, gold);
    }

    /// Short documents get zero padding rows; pooling windows can land on
    /// them, so the backward pass must stay consistent there too. Biases
    /// are nudged off zero: an all-padding window sits at pre-activation
    /// exactly `bias`, and central differences straddling the rectifier
    /// kink at 0 would disagree with the zero-subgradient convention.
    #[test]
    fn gradients_match_finite_differences_with_padding_rows() {
        let (mut p, cfg, mut dm) = micro(Mode::Sc, true, 6);
        let mut krng = Rng::new(77);
        for b in p
            .word_conv
            .biases
            .iter_mut()
            .chain(p.lex_conv.as_mut().unwrap().biases.iter_mut())
            .chain(p.word_attn.as_mut().unwrap().biases.iter_mut())
            .chain(p.lex_attn.as_mut().unwrap().biases.iter_mut())
        {
            *b = krng.uniform(0.002, 0.05);
        }
        dm.tokens.truncate(2);
        dm.padding_rows = 5;
        for i in 2..7 {
            dm.word_matrix.row_mut(i).fill(0.0);
            dm.lexicon_matrix.as_mut().unwrap().row_mut(i).fill(0.0);
        }
        fd_check(p, cfg, dm, 1);
    }

    fn fd_check(p: ModelParameters, cfg: ModelConfig, dm: DocumentMatrices, gold: usize) {
        let trace = forward(dm.clone(), &p, &cfg).unwrap();
        let (_, grads) = loss_and_gradients(&trace, gold, &p).unwrap();
        let analytic = grads.flatten();
        let theta = p.flatten();
        let eps = 1e-5;
        let mut worst = 0.0f64;
        // probe a deterministic sample of coordinates
        let stride = (theta.len() / 60).max(1);
        for i in (0..theta.len()).step_by(stride) {
            let mut plus = theta.clone();
            plus[i] += eps;
            let mut minus = theta.clone();
            minus[i] -= eps;
            let mut pp = p.zeros_like();
            pp.unflatten(&plus);
            let mut pm = p.zeros_like();
            pm.unflatten(&minus);
            let lp = -forward(dm.clone(), &pp, &cfg)
                .unwrap()
                .class_probabilities[gold]
                .ln();
            let lm = -forward(dm.clone(), &pm, &cfg)
                .unwrap()
                .class_probabilities[gold]
                .ln();
            let numeric = (lp - lm) / (2.0 * eps);
            let denom = numeric.abs().max(analytic[i].abs()).max(1e-8);
            worst = worst.max((numeric - analytic[i]).abs() / denom);
        }
        assert!(worst <= 1e-4, "max relative error {worst}");
    }
}
