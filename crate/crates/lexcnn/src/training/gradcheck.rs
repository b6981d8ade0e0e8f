//! Central-difference gradient checking.

use crate::corpus::Document;
use crate::embeddings::{
    build_lexicon_table_from_sources, document_matrices, LexiconSource, LexiconTable, OovPolicy,
    WordEmbeddingTable,
};
use crate::error::{Error, Result};
use crate::model::{forward, loss_and_gradients, ModelConfig, ModelParameters, Mode, TunedView};
use crate::rng::Rng;
use crate::training::{Precision, TrainConfig};

/// Worst relative error between `analytic` and central differences of `f`
/// at `theta`, using `max(|numeric|, |analytic|, 1e-8)` as the denominator.
pub fn max_rel_error_central<F>(
    mut f: F,
    theta: &[f64],
    analytic: &[f64],
    epsilon: f64,
) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference epsilon must be positive, got {epsilon}"
        )));
    }
    if theta.len() != analytic.len() {
        return Err(Error::Data("gradient length mismatch".into()));
    }
    let mut point = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        let saved = point[i];
        point[i] = saved + epsilon;
        let plus = f(&point)?;
        point[i] = saved - epsilon;
        let minus = f(&point)?;
        point[i] = saved;
        if !(plus.is_finite() && minus.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite loss while probing parameter {i}"
            )));
        }
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = numeric.abs().max(analytic[i].abs()).max(1e-8);
        worst = worst.max((numeric - analytic[i]).abs() / denom);
    }
    Ok(worst)
}

/// A fixed micro instance: 7 tokens (with repeats and OOV words), d = 5,
/// e = 3, 4 word filters, 2 lexicon filters, 3 attention filters per space,
/// 3 classes.
pub struct MicroProbe {
    pub params: ModelParameters,
    pub doc: Document,
    pub emb: WordEmbeddingTable,
    pub lex: LexiconTable,
    pub gold: usize,
}

pub fn micro_probe(mode: Mode, eav: bool, seed: u64) -> Result<MicroProbe> {
    let config = ModelConfig {
        mode,
        eav,
        word_filter_lengths: vec![2, 3, 4, 5],
        lex_filter_lengths: vec![2, 3, 4, 5],
        word_filters: 4,
        lex_filters: 2,
        word_attn_filters: 3,
        lex_attn_filters: 3,
    };
    let mut rng = Rng::new(seed);

    let mut emb = WordEmbeddingTable::new(5, OovPolicy::SeededUniform { seed: seed ^ 0xa5a5 });
    for w in ["w0", "w1", "w2"] {
        let v = (0..5).map(|_| rng.uniform(-0.5, 0.5)).collect();
        emb.insert(w, v);
    }
    let rows = vec![
        ("w1".to_string(), vec![0.9, -0.4, 0.2]),
        ("w3".to_string(), vec![-0.7, 0.8, -0.1]),
    ];
    let lex = build_lexicon_table_from_sources(&[LexiconSource::from_rows("probe", rows)?])?;

    let tokens = ["w0", "w1", "w2", "w3", "w4", "w0", "w2"];
    let doc = Document {
        id: "probe".into(),
        tokens: tokens.iter().map(|s| s.to_string()).collect(),
        label: 2,
    };
    let vocab = tokens.iter().map(|s| s.to_string()).collect();
    let params = ModelParameters::init(&config, 5, 3, 3, Some((vocab, &emb)), &mut rng)?;
    Ok(MicroProbe {
        params,
        doc,
        emb,
        lex,
        gold: 2,
    })
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// Worst relative error per parameter group.
    pub groups: Vec<(String, f64)>,
    pub max_relative_error: f64,
    pub parameter_count: usize,
}

/// Checks every parameter of the micro model for the configured mode
/// against central differences. Dropout never applies here and the check
/// refuses the f32 storage option.
pub fn grad_check(cfg: &TrainConfig, probe_seed: u64, epsilon: f64) -> Result<GradCheckReport> {
    if cfg.precision == Precision::F32 {
        return Err(Error::Config(
            "gradient checking requires f64 parameter storage".into(),
        ));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::Config(format!(
            "finite-difference epsilon must be positive, got {epsilon}"
        )));
    }
    let probe = micro_probe(cfg.model.mode, cfg.model.eav, probe_seed)?;
    let MicroProbe {
        params,
        doc,
        emb,
        lex,
        gold,
    } = probe;
    let model_cfg = params.config.clone();
    let pad_to = model_cfg.pad_to();

    let loss_at = |p: &ModelParameters| -> Result<f64> {
        let tuned = p.tuned.as_ref().expect("probe uses tuned embeddings");
        let dm = document_matrices(
            &doc,
            &TunedView { tuned, base: &emb },
            Some(&lex),
            model_cfg.mode,
            pad_to,
        )?;
        let trace = forward(dm, p, &model_cfg)?;
        Ok(-trace.class_probabilities[gold].ln())
    };

    let base_loss = loss_at(&params)?;
    if !base_loss.is_finite() {
        return Err(Error::Numeric("non-finite loss at the probe point".into()));
    }

    let dm = document_matrices(
        &doc,
        &TunedView {
            tuned: params.tuned.as_ref().unwrap(),
            base: &emb,
        },
        Some(&lex),
        model_cfg.mode,
        pad_to,
    )?;
    let trace = forward(dm, &params, &model_cfg)?;
    let (_, grads) = loss_and_gradients(&trace, gold, &params)?;
    let analytic = grads.flatten();
    let theta = params.flatten();

    let mut scratch = params.clone();
    let mut point = theta.clone();
    let mut groups = Vec::new();
    let mut overall = 0.0f64;
    for (name, span) in params.group_spans() {
        let mut worst = 0.0f64;
        for i in span {
            let saved = point[i];
            point[i] = saved + epsilon;
            scratch.unflatten(&point);
            let plus = loss_at(&scratch)?;
            point[i] = saved - epsilon;
            scratch.unflatten(&point);
            let minus = loss_at(&scratch)?;
            point[i] = saved;
            let numeric = (plus - minus) / (2.0 * epsilon);
            let denom = numeric.abs().max(analytic[i].abs()).max(1e-8);
            worst = worst.max((numeric - analytic[i]).abs() / denom);
        }
        overall = overall.max(worst);
        groups.push((name, worst));
    }
    scratch.unflatten(&theta);

    Ok(GradCheckReport {
        groups,
        max_relative_error: overall,
        parameter_count: theta.len(),
    })
}
