//! Seeded mini-batch training with early stopping.
//!
//! Given `(datasets, tables, config)` a run is deterministic bit for bit:
//! parameter initialization, per-epoch shuffling and dropout all draw from
//! one generator seeded by `seed`, and the optimizer is plain Adam over the
//! canonical flattened parameter vector.

mod gradcheck;
mod group;

pub use gradcheck::{grad_check, max_rel_error_central, micro_probe, GradCheckReport};
pub use group::{
    box_stats, default_seeds, embedding_size_sweep, group_run, percentile, population_std,
    BoxStats, GroupData, GroupRunResult, GroupStats, SizeScore, SweepStats, SweepVariant,
    VariantGroup,
};

use std::time::Instant;

use crate::corpus::{Dataset, LabelScheme};
use crate::embeddings::{document_matrices, LexiconTable, WordEmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::{confusion, ConfusionMatrix, Metric};
use crate::model::{
    accumulate_gradients, forward, forward_with_dropout, variant_name, ForwardTrace, ModelConfig,
    ModelParameters, Mode, TunedView,
};
use crate::rng::Rng;

/// Whether looked-up embedding rows receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tuning {
    Tuned,
    Static,
}

/// Parameter storage precision. `F32` rounds parameters through single
/// precision after initialization and after every optimizer step; all
/// arithmetic still runs in f64. Excluded from gradient-check suites.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F64,
    F32,
}

/// Full training configuration. The defaults reproduce the reference
/// setup: filter lengths (2, 3, 4, 5) on both channels, 64 and 9 filters
/// for the word and lexicon convolutions, 50 and 20 attention filters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a dev improvement.
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
    pub oov_seed: u64,
    /// `None` selects by scheme: averaged pos/neg F1 for 3-class data,
    /// accuracy otherwise.
    pub metric: Option<Metric>,
    pub tuning: Tuning,
    pub precision: Precision,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            learning_rate: 1e-3,
            batch_size: 50,
            max_epochs: 200,
            patience: 25,
            dropout: 0.5,
            seed: 1,
            oov_seed: 1,
            metric: None,
            tuning: Tuning::Tuned,
            precision: Precision::F64,
        }
    }
}

fn parse_lengths(value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad filter length `{s}`")))
        })
        .collect()
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.patience == 0 {
            return Err(Error::Config(
                "batch size, max epochs and patience must be positive".into(),
            ));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        Ok(())
    }

    pub fn resolve_metric(&self, scheme: LabelScheme) -> Metric {
        self.metric.unwrap_or(match scheme {
            LabelScheme::Three => Metric::AvgF1,
            LabelScheme::Five => Metric::Accuracy,
        })
    }

    pub fn variant(&self) -> String {
        variant_name(self.model.mode, self.model.eav)
    }

    /// Applies one `key = value` setting.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "mode" => self.model.mode = Mode::parse(value)?,
            "eav" => {
                self.model.eav = match value {
                    "true" | "on" => true,
                    "false" | "off" => false,
                    _ => return Err(Error::Config(format!("bad eav value `{value}`"))),
                }
            }
            "word_filter_lengths" => self.model.word_filter_lengths = parse_lengths(value)?,
            "lex_filter_lengths" => self.model.lex_filter_lengths = parse_lengths(value)?,
            "word_filters" => self.model.word_filters = parse_num(key, value)?,
            "lex_filters" => self.model.lex_filters = parse_num(key, value)?,
            "word_attn_filters" => self.model.word_attn_filters = parse_num(key, value)?,
            "lex_attn_filters" => self.model.lex_attn_filters = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "max_epochs" => self.max_epochs = parse_num(key, value)?,
            "patience" => self.patience = parse_num(key, value)?,
            "dropout" => self.dropout = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "oov_seed" => self.oov_seed = parse_num(key, value)?,
            "metric" => {
                self.metric = match value {
                    "auto" => None,
                    other => Some(Metric::parse(other)?),
                }
            }
            "embeddings" => {
                self.tuning = match value {
                    "tuned" => Tuning::Tuned,
                    "static" => Tuning::Static,
                    _ => {
                        return Err(Error::Config(format!(
                            "bad embeddings value `{value}` (expected tuned or static)"
                        )))
                    }
                }
            }
            "precision" => {
                self.precision = match value {
                    "f64" => Precision::F64,
                    "f32" => Precision::F32,
                    _ => return Err(Error::Config(format!("bad precision `{value}`"))),
                }
            }
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Parses a flat `key = value` config file body.
    pub fn from_kv_text(text: &str, origin: &str) -> Result<TrainConfig> {
        let mut cfg = TrainConfig::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::parse(origin, idx + 1, "expected `key = value`")
            })?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| Error::parse(origin, idx + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Every field as `key = value` pairs, in a fixed order. This is the
    /// effective-config echo written into output artifacts.
    pub fn echo(&self) -> Vec<(String, String)> {
        let join = |xs: &[usize]| {
            xs.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        let pairs: Vec<(&str, String)> = vec![
            ("mode", self.model.mode.to_string()),
            ("eav", self.model.eav.to_string()),
            ("word_filter_lengths", join(&self.model.word_filter_lengths)),
            ("lex_filter_lengths", join(&self.model.lex_filter_lengths)),
            ("word_filters", self.model.word_filters.to_string()),
            ("lex_filters", self.model.lex_filters.to_string()),
            ("word_attn_filters", self.model.word_attn_filters.to_string()),
            ("lex_attn_filters", self.model.lex_attn_filters.to_string()),
            ("learning_rate", self.learning_rate.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("max_epochs", self.max_epochs.to_string()),
            ("patience", self.patience.to_string()),
            ("dropout", self.dropout.to_string()),
            ("seed", self.seed.to_string()),
            ("oov_seed", self.oov_seed.to_string()),
            (
                "metric",
                self.metric.map_or("auto".to_string(), |m| m.to_string()),
            ),
            (
                "embeddings",
                match self.tuning {
                    Tuning::Tuned => "tuned".to_string(),
                    Tuning::Static => "static".to_string(),
                },
            ),
            (
                "precision",
                match self.precision {
                    Precision::F64 => "f64".to_string(),
                    Precision::F32 => "f32".to_string(),
                },
            ),
        ];
        pairs
            .into_iter()
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("bad value `{value}` for `{key}`")))
}

/// One epoch of the training record.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_metric: f64,
    /// Wall clock, kept out of serialized artifacts so outputs stay
    /// byte-reproducible.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned (max dev metric, ties
    /// toward the earliest epoch).
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best_dev_metric(&self) -> f64 {
        self.epochs[self.best_epoch - 1].dev_metric
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    fn new(lr: f64, count: usize) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; count],
            v: vec![0.0; count],
        }
    }

    fn step(&mut self, params: &mut ModelParameters, grads: &ModelParameters) {
        self.t += 1;
        let mut flat = params.flatten();
        let g = grads.flatten();
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..flat.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g[i] * g[i];
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            flat[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        params.unflatten(&flat);
    }
}

/// Builds the model input for one document under the current parameters.
fn matrices_for<'a>(
    doc: &crate::corpus::Document,
    params: &'a ModelParameters,
    emb: &'a WordEmbeddingTable,
    lex: Option<&LexiconTable>,
    pad_to: usize,
) -> Result<crate::embeddings::DocumentMatrices> {
    match &params.tuned {
        Some(tuned) => document_matrices(
            doc,
            &TunedView { tuned, base: emb },
            lex,
            params.config.mode,
            pad_to,
        ),
        None => document_matrices(doc, emb, lex, params.config.mode, pad_to),
    }
}

/// Forward traces for every document, without dropout.
pub fn predict_traces(
    ds: &Dataset,
    params: &ModelParameters,
    emb: &WordEmbeddingTable,
    lex: Option<&LexiconTable>,
) -> Result<Vec<ForwardTrace>> {
    let pad_to = params.config.pad_to();
    ds.documents
        .iter()
        .map(|doc| {
            let dm = matrices_for(doc, params, emb, lex, pad_to)?;
            forward(dm, params, &params.config)
        })
        .collect()
}

/// Confusion matrix of a model over a dataset.
pub fn evaluate_model(
    ds: &Dataset,
    params: &ModelParameters,
    emb: &WordEmbeddingTable,
    lex: Option<&LexiconTable>,
) -> Result<ConfusionMatrix> {
    let traces = predict_traces(ds, params, emb, lex)?;
    let predictions: Vec<usize> = traces.iter().map(ForwardTrace::predicted_class).collect();
    let gold: Vec<usize> = ds.documents.iter().map(|d| d.label).collect();
    confusion(ds.scheme, &predictions, &gold)
}

/// Trains one model and returns the parameters of the best dev epoch.
pub fn train(
    trn: &Dataset,
    dev: &Dataset,
    emb: &WordEmbeddingTable,
    lex: Option<&LexiconTable>,
    cfg: &TrainConfig,
) -> Result<(ModelParameters, TrainHistory)> {
    cfg.validate()?;
    if trn.scheme != dev.scheme {
        return Err(Error::Data(
            "training and development sets use different label schemes".into(),
        ));
    }
    if trn.is_empty() || dev.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    if cfg.model.mode.uses_lexicon() && lex.is_none() {
        return Err(Error::Config(format!(
            "{} mode requires a lexicon table",
            cfg.model.mode
        )));
    }

    let d = emb.dim();
    let e = lex.map_or(0, LexiconTable::width);
    let classes = trn.scheme.classes();
    let metric = cfg.resolve_metric(trn.scheme);
    let pad_to = cfg.model.pad_to();

    let mut rng = Rng::new(cfg.seed);
    let tuned_vocab = match cfg.tuning {
        Tuning::Tuned => Some((
            trn.word_types().iter().map(|s| s.to_string()).collect(),
            emb,
        )),
        Tuning::Static => None,
    };
    let mut params = ModelParameters::init(&cfg.model, d, e, classes, tuned_vocab, &mut rng)?;
    if cfg.precision == Precision::F32 {
        params.round_to_f32();
    }

    let mut adam = Adam::new(cfg.learning_rate, params.param_count());
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..trn.len()).collect();

    let mut history = Vec::new();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_epoch = 0usize;
    let mut best_params: Option<ModelParameters> = None;
    let mut stale_epochs = 0usize;

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_index, batch) in order.chunks(cfg.batch_size).enumerate() {
            grads.scale(0.0);
            let weight = 1.0 / batch.len() as f64;
            for &doc_index in batch {
                let doc = &trn.documents[doc_index];
                let dm = matrices_for(doc, &params, emb, lex, pad_to)?;
                let trace = if cfg.dropout > 0.0 {
                    forward_with_dropout(dm, &params, &cfg.model, &mut rng, cfg.dropout)?
                } else {
                    forward(dm, &params, &cfg.model)?
                };
                let loss = accumulate_gradients(&trace, doc.label, &params, &mut grads, weight)?;
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "training diverged: non-finite loss at epoch {epoch}, batch {}",
                        batch_index + 1
                    )));
                }
                loss_sum += loss;
            }
            adam.step(&mut params, &grads);
            if cfg.precision == Precision::F32 {
                params.round_to_f32();
            }
        }

        let dev_cm = evaluate_model(dev, &params, emb, lex)?;
        let dev_metric = metric.compute(&dev_cm)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / trn.len() as f64,
            dev_metric,
            seconds: started.elapsed().as_secs_f64(),
        });

        if dev_metric > best_metric {
            best_metric = dev_metric;
            best_epoch = epoch;
            best_params = Some(params.clone());
            stale_epochs = 0;
        } else {
            stale_epochs += 1;
            if stale_epochs >= cfg.patience {
                break;
            }
        }
    }

    Ok((
        best_params.expect("at least one epoch ran"),
        TrainHistory {
            epochs: history,
            best_epoch,
        },
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::corpus::{Document, Split};
    use crate::embeddings::{LexiconSource, OovPolicy};
    use crate::model::loss_and_gradients;

    /// A linearly separable toy task: one carrier word decides the class,
    /// the rest is shared filler.
    pub(crate) fn toy_task() -> (Dataset, Dataset, WordEmbeddingTable, LexiconTable) {
        let carriers = ["goodish", "mehish", "badish"];
        let fillers = ["the", "a", "movie", "plot", "was", "on"];
        let mut rng = Rng::new(77);
        let mut make = |count: usize, split: Split| {
            let documents = (0..count)
                .map(|i| {
                    let label = i % 3;
                    let mut tokens = vec![carriers[label].to_string()];
                    for _ in 0..4 {
                        tokens.push(fillers[rng.below(fillers.len())].to_string());
                    }
                    rng.shuffle(&mut tokens);
                    Document {
                        id: format!("{split}-{i}"),
                        tokens,
                        label,
                    }
                })
                .collect();
            Dataset {
                documents,
                scheme: LabelScheme::Three,
                split,
            }
        };
        let trn = make(24, Split::Trn);
        let dev = make(9, Split::Dev);

        let mut emb = WordEmbeddingTable::new(6, OovPolicy::SeededUniform { seed: 1 });
        let mut erng = Rng::new(5);
        for w in carriers.iter().chain(fillers.iter()) {
            let v = (0..6).map(|_| erng.uniform(-0.25, 0.25)).collect();
            emb.insert(*w, v);
        }
        let rows = vec![
            ("goodish".to_string(), vec![0.9, -0.8]),
            ("badish".to_string(), vec![-0.9, 0.7]),
            ("mehish".to_string(), vec![0.05, -0.02]),
        ];
        let lex = crate::embeddings::build_lexicon_table_from_sources(&[
            LexiconSource::from_rows("toy", rows).unwrap(),
        ])
        .unwrap();
        (trn, dev, emb, lex)
    }

    pub(crate) fn tiny_config(mode: Mode, eav: bool) -> TrainConfig {
        TrainConfig {
            model: ModelConfig {
                mode,
                eav,
                word_filter_lengths: vec![2, 3],
                lex_filter_lengths: vec![1, 2],
                word_filters: 6,
                lex_filters: 3,
                word_attn_filters: 4,
                lex_attn_filters: 3,
            },
            batch_size: 8,
            max_epochs: 40,
            patience: 40,
            dropout: 0.25,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (trn, dev, emb, lex) = toy_task();
        let mut cfg = tiny_config(Mode::Sc, true);
        cfg.max_epochs = 6;
        let (p1, h1) = train(&trn, &dev, &emb, Some(&lex), &cfg).unwrap();
        let (p2, h2) = train(&trn, &dev, &emb, Some(&lex), &cfg).unwrap();
        // wall-clock timings may differ; everything serialized must not
        let csv = |h: &TrainHistory| crate::report::render_history_csv(h, "");
        assert_eq!(csv(&h1), csv(&h2));
        let (a, b) = (p1.flatten(), p2.flatten());
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));

        let mut other = cfg.clone();
        other.seed = 2;
        let (_, h3) = train(&trn, &dev, &emb, Some(&lex), &other).unwrap();
        assert_ne!(csv(&h1), csv(&h3));
    }

    #[test]
    fn early_stopping_returns_best_dev_epoch() {
        let (trn, dev, emb, lex) = toy_task();
        let mut cfg = tiny_config(Mode::Nc, false);
        cfg.max_epochs = 15;
        cfg.patience = 5;
        let (params, history) = train(&trn, &dev, &emb, Some(&lex), &cfg).unwrap();
        let best = history
            .epochs
            .iter()
            .map(|e| e.dev_metric)
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(history.best_dev_metric(), best);
        // the earliest epoch attaining the maximum wins
        let earliest = history
            .epochs
            .iter()
            .find(|e| e.dev_metric == best)
            .unwrap()
            .epoch;
        assert_eq!(history.best_epoch, earliest);
        // returned parameters reproduce the recorded best metric
        let cm = evaluate_model(&dev, &params, &emb, Some(&lex)).unwrap();
        let metric = cfg.resolve_metric(trn.scheme).compute(&cm).unwrap();
        assert_eq!(metric, best);
    }

    #[test]
    fn batch_gradient_equals_average_of_documents() {
        let (trn, _, emb, lex) = toy_task();
        let cfg = tiny_config(Mode::Sc, true);
        let mut rng = Rng::new(3);
        let vocab = trn.word_types().iter().map(|s| s.to_string()).collect();
        let params = ModelParameters::init(
            &cfg.model,
            emb.dim(),
            lex.width(),
            3,
            Some((vocab, &emb)),
            &mut rng,
        )
        .unwrap();
        let pad_to = cfg.model.pad_to();

        let docs = &trn.documents[..4];
        let mut batch_grads = params.zeros_like();
        for doc in docs {
            let dm = matrices_for(doc, &params, &emb, Some(&lex), pad_to).unwrap();
            let trace = forward(dm, &params, &cfg.model).unwrap();
            accumulate_gradients(&trace, doc.label, &params, &mut batch_grads, 0.25).unwrap();
        }

        let mut manual = params.zeros_like();
        for doc in docs {
            let dm = matrices_for(doc, &params, &emb, Some(&lex), pad_to).unwrap();
            let trace = forward(dm, &params, &cfg.model).unwrap();
            let (_, g) = loss_and_gradients(&trace, doc.label, &params).unwrap();
            manual.add_scaled(&g, 0.25);
        }

        let a = batch_grads.flatten();
        let b = manual.flatten();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12, "{x} vs {y}");
        }
    }

    #[test]
    fn divergence_is_reported() {
        let (trn, dev, emb, lex) = toy_task();
        let mut cfg = tiny_config(Mode::Base, false);
        cfg.learning_rate = 1e280;
        cfg.max_epochs = 10;
        let err = train(&trn, &dev, &emb, Some(&lex), &cfg).unwrap_err();
        match err {
            Error::Numeric(msg) => assert!(msg.contains("epoch"), "{msg}"),
            other => panic!("expected numeric error, got {other}"),
        }
    }

    #[test]
    fn lexicon_modes_require_a_table() {
        let (trn, dev, emb, _) = toy_task();
        let cfg = tiny_config(Mode::Sc, false);
        assert!(train(&trn, &dev, &emb, None, &cfg).is_err());
    }

    #[test]
    fn config_defaults_and_round_trip() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.model.word_filter_lengths, vec![2, 3, 4, 5]);
        assert_eq!(cfg.model.word_filters, 64);
        assert_eq!(cfg.model.lex_filters, 9);
        assert_eq!(cfg.model.word_attn_filters, 50);
        assert_eq!(cfg.model.lex_attn_filters, 20);
        assert_eq!(cfg.batch_size, 50);
        assert_eq!(cfg.max_epochs, 200);
        assert_eq!(cfg.patience, 25);
        assert_eq!(cfg.dropout, 0.5);
        assert_eq!(cfg.seed, 1);

        let text: String = cfg
            .echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let parsed = TrainConfig::from_kv_text(&text, "test").unwrap();
        assert_eq!(parsed, cfg);
    }

    #[test]
    fn config_rejects_unknown_key() {
        let err = TrainConfig::from_kv_text("nonsense = 1\n", "test").unwrap_err();
        assert!(err.to_string().contains("unknown config key"));
    }

    #[test]
    fn config_rejects_bad_dropout() {
        let mut cfg = TrainConfig::default();
        cfg.apply("dropout", "1.5").unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn five_class_training_runs_end_to_end() {
        let carriers = ["superb", "fine", "plain", "weak", "awful"];
        let fillers = ["the", "film", "was", "a"];
        let mut rng = Rng::new(13);
        let mut make = |count: usize, split: Split| {
            let documents = (0..count)
                .map(|i| {
                    let label = i % 5;
                    let mut tokens = vec![carriers[label].to_string()];
                    for _ in 0..3 {
                        tokens.push(fillers[rng.below(fillers.len())].to_string());
                    }
                    Document {
                        id: format!("{split}-{i}"),
                        tokens,
                        label,
                    }
                })
                .collect();
            Dataset {
                documents,
                scheme: LabelScheme::Five,
                split,
            }
        };
        let trn = make(20, Split::Trn);
        let dev = make(10, Split::Dev);
        let mut emb = WordEmbeddingTable::new(4, crate::embeddings::OovPolicy::Zero);
        let mut erng = Rng::new(2);
        for w in carriers.iter().chain(fillers.iter()) {
            emb.insert(*w, (0..4).map(|_| erng.uniform(-0.25, 0.25)).collect());
        }
        let mut cfg = tiny_config(Mode::Base, false);
        cfg.max_epochs = 5;
        cfg.patience = 5;
        let (params, history) = train(&trn, &dev, &emb, None, &cfg).unwrap();
        assert_eq!(params.classes, 5);
        assert_eq!(cfg.resolve_metric(trn.scheme), Metric::Accuracy);
        assert!(history.best_dev_metric() >= 0.0);
        let cm = evaluate_model(&dev, &params, &emb, None).unwrap();
        assert_eq!(cm.total(), 10);
    }

    #[test]
    fn metric_resolution_by_scheme() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.resolve_metric(LabelScheme::Three), Metric::AvgF1);
        assert_eq!(cfg.resolve_metric(LabelScheme::Five), Metric::Accuracy);
        let mut forced = cfg;
        forced.apply("metric", "acc").unwrap();
        assert_eq!(forced.resolve_metric(LabelScheme::Three), Metric::Accuracy);
    }
}
