//! Browser playground for the lexicon-integrated classifiers.
//!
//! Three operations are exposed to JavaScript, all JSON-in/JSON-out:
//!
//! * [`demo_train`] — train a chosen variant on the bundled synthetic
//!   lexicon-benefit task and return the learning curve plus held-out
//!   accuracy; the trained model is kept for the other calls.
//! * [`demo_classify`] — run the trained model over a text and return
//!   class probabilities with per-token attention weights.
//! * [`demo_lexicon`] — look up a word's lexicon embedding and report
//!   whether the word-embedding vocabulary knows it.
//!
//! The page in `www/` drives these with plain JavaScript. Everything also
//! compiles natively so the logic is unit-tested with `cargo test`.

use std::cell::RefCell;

use serde::Serialize;
use wasm_bindgen::prelude::*;

use lexcnn::corpus::{tokenize, Document, LabelScheme};
use lexcnn::eval::accuracy;
use lexcnn::model::{forward, parse_variant, ModelParameters};
use lexcnn::synthetic::{lexicon_benefit_task, SyntheticTask};
use lexcnn::training::{evaluate_model, predict_traces, train, TrainConfig, Tuning};

struct DemoState {
    params: ModelParameters,
    task: SyntheticTask,
}

thread_local! {
    static STATE: RefCell<Option<DemoState>> = const { RefCell::new(None) };
}

#[derive(Serialize)]
struct CurvePoint {
    epoch: usize,
    train_loss: f64,
    dev_metric: f64,
}

#[derive(Serialize)]
struct TokenWeight {
    token: String,
    word: f64,
    lexicon: Option<f64>,
}

#[derive(Serialize)]
struct ExampleDoc {
    id: String,
    gold: String,
    predicted: String,
    tokens: Vec<TokenWeight>,
}

#[derive(Serialize)]
struct TrainReport {
    variant: String,
    seed: u64,
    epochs_run: usize,
    best_epoch: usize,
    test_accuracy: f64,
    curve: Vec<CurvePoint>,
    examples: Vec<ExampleDoc>,
    carriers: Vec<Vec<String>>,
    fillers: Vec<String>,
}

/// Small filter counts keep a browser training run in the seconds range.
fn demo_config(variant: &str, seed: u64, max_epochs: usize) -> Result<TrainConfig, String> {
    let (mode, eav) = parse_variant(variant).map_err(|e| e.to_string())?;
    let mut cfg = TrainConfig::default();
    cfg.model.mode = mode;
    cfg.model.eav = eav;
    cfg.model.word_filters = 16;
    cfg.model.lex_filters = 4;
    cfg.model.word_attn_filters = 12;
    cfg.model.lex_attn_filters = 6;
    cfg.batch_size = 10;
    cfg.max_epochs = max_epochs.clamp(1, 200);
    cfg.patience = cfg.max_epochs;
    cfg.seed = seed;
    cfg.tuning = Tuning::Static;
    Ok(cfg)
}

fn attention_tokens(
    trace: &lexcnn::model::ForwardTrace,
    tokens: &[String],
) -> Vec<TokenWeight> {
    match &trace.attention {
        Some(record) => record
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| TokenWeight {
                token: t.clone(),
                word: record.word_weights[i],
                lexicon: record.lexicon_weights.as_ref().map(|w| w[i]),
            })
            .collect(),
        None => tokens
            .iter()
            .map(|t| TokenWeight {
                token: t.clone(),
                word: 0.0,
                lexicon: None,
            })
            .collect(),
    }
}

fn train_impl(variant: &str, seed: u64, max_epochs: usize) -> Result<String, String> {
    let cfg = demo_config(variant, seed, max_epochs)?;
    let task = lexicon_benefit_task(1);
    let lex = cfg.model.mode.uses_lexicon().then_some(&task.lexicon);

    let (params, history) =
        train(&task.train, &task.dev, &task.embeddings, lex, &cfg).map_err(|e| e.to_string())?;
    let cm = evaluate_model(&task.test, &params, &task.embeddings, lex)
        .map_err(|e| e.to_string())?;
    let test_accuracy = accuracy(&cm).map_err(|e| e.to_string())?;

    let sample: Vec<Document> = task.test.documents.iter().take(6).cloned().collect();
    let sample_ds = lexcnn::corpus::Dataset {
        documents: sample,
        scheme: task.test.scheme,
        split: task.test.split,
    };
    let traces = predict_traces(&sample_ds, &params, &task.embeddings, lex)
        .map_err(|e| e.to_string())?;
    let examples = sample_ds
        .documents
        .iter()
        .zip(&traces)
        .map(|(doc, trace)| ExampleDoc {
            id: doc.id.clone(),
            gold: task.test.scheme.label_name(doc.label).to_string(),
            predicted: task.test.scheme.label_name(trace.predicted_class()).to_string(),
            tokens: attention_tokens(trace, &doc.tokens),
        })
        .collect();

    let report = TrainReport {
        variant: cfg.variant(),
        seed,
        epochs_run: history.epochs.len(),
        best_epoch: history.best_epoch,
        test_accuracy,
        curve: history
            .epochs
            .iter()
            .map(|e| CurvePoint {
                epoch: e.epoch,
                train_loss: e.train_loss,
                dev_metric: e.dev_metric,
            })
            .collect(),
        examples,
        carriers: task.carriers.clone(),
        fillers: (0..12).map(|i| format!("filler{i:02}")).collect(),
    };
    let json = serde_json::to_string(&report).map_err(|e| e.to_string())?;
    STATE.with(|state| *state.borrow_mut() = Some(DemoState { params, task }));
    Ok(json)
}

#[derive(Serialize)]
struct ClassifyReport {
    tokens: Vec<TokenWeight>,
    labels: Vec<String>,
    probabilities: Vec<f64>,
    predicted: String,
}

fn classify_impl(text: &str) -> Result<String, String> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err("no tokens after tokenization".to_string());
    }
    STATE.with(|state| {
        let state = state.borrow();
        let state = state
            .as_ref()
            .ok_or_else(|| "train a model first".to_string())?;
        let doc = Document {
            id: "input".into(),
            tokens: tokens.clone(),
            label: 0,
        };
        let cfg = &state.params.config;
        let lex = cfg.mode.uses_lexicon().then_some(&state.task.lexicon);
        let dm = lexcnn::embeddings::document_matrices(
            &doc,
            &state.task.embeddings,
            lex,
            cfg.mode,
            cfg.pad_to(),
        )
        .map_err(|e| e.to_string())?;
        let trace = forward(dm, &state.params, cfg).map_err(|e| e.to_string())?;
        let scheme = LabelScheme::Three;
        let report = ClassifyReport {
            tokens: attention_tokens(&trace, &tokens),
            labels: scheme.labels().iter().map(|s| s.to_string()).collect(),
            probabilities: trace.class_probabilities.clone(),
            predicted: scheme.label_name(trace.predicted_class()).to_string(),
        };
        serde_json::to_string(&report).map_err(|e| e.to_string())
    })
}

#[derive(Serialize)]
struct LexiconReport {
    word: String,
    scores: Vec<f64>,
    spans: Vec<(String, usize, usize)>,
    in_lexicon: bool,
    in_embeddings: bool,
}

fn lexicon_impl(word: &str) -> Result<String, String> {
    let normalized = tokenize(word);
    let token = normalized
        .first()
        .ok_or_else(|| "empty word".to_string())?;
    STATE.with(|state| {
        let state = state.borrow();
        let (lexicon, embeddings) = match state.as_ref() {
            Some(s) => (&s.task.lexicon, &s.task.embeddings),
            None => return Err("train a model first".to_string()),
        };
        let report = LexiconReport {
            word: token.clone(),
            scores: lexicon.vector(token),
            spans: lexicon
                .spans()
                .iter()
                .map(|(name, r)| (name.clone(), r.start, r.end))
                .collect(),
            in_lexicon: lexicon.contains(token),
            in_embeddings: embeddings.contains(token),
        };
        serde_json::to_string(&report).map_err(|e| e.to_string())
    })
}

#[wasm_bindgen]
pub fn demo_train(variant: &str, seed: u32, max_epochs: u32) -> Result<String, JsValue> {
    train_impl(variant, seed as u64, max_epochs as usize).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn demo_classify(text: &str) -> Result<String, JsValue> {
    classify_impl(text).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn demo_lexicon(word: &str) -> Result<String, JsValue> {
    lexicon_impl(word).map_err(|e| JsValue::from_str(&e))
}
