//! Static report artifacts: attention heatmaps, learning curves, group box
//! statistics and training histories.
//!
//! All CSV files are UTF-8, comma-separated with a header row and `\n` line
//! endings; `#` lines before the header carry provenance. Emitted floats
//! use the shortest representation that parses back to the same value, so
//! every CSV round-trips exactly.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::model::ForwardTrace;
use crate::training::{GroupStats, TrainHistory};

// --- tiny CSV plumbing -------------------------------------------------------

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn split_csv_line(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            }
            '"' if cur.is_empty() => quoted = true,
            ',' if !quoted => fields.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    fields.push(cur);
    fields
}

fn parse_f64(path: &str, lineno: usize, s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::parse(path, lineno, format!("bad number `{s}`")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

// --- attention heatmaps ------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapDocument {
    pub id: String,
    pub tokens: Vec<String>,
    pub word_weights: Vec<f64>,
    pub lexicon_weights: Option<Vec<f64>>,
    pub predicted: String,
    pub gold: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeatmapFormat {
    Csv,
    Html,
}

impl HeatmapFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(HeatmapFormat::Csv),
            "html" => Ok(HeatmapFormat::Html),
            other => Err(Error::Config(format!("unknown heatmap format `{other}`"))),
        }
    }
}

/// Pairs each document with its attention record and prediction. Fails when
/// the model was trained without the attention vectors.
pub fn heatmap_documents(
    ds: &Dataset,
    traces: &[ForwardTrace],
) -> Result<Vec<HeatmapDocument>> {
    if ds.documents.len() != traces.len() {
        return Err(Error::Data("one trace per document required".into()));
    }
    ds.documents
        .iter()
        .zip(traces)
        .map(|(doc, trace)| {
            let record = trace
                .attention
                .as_ref()
                .ok_or_else(|| Error::Config("attention unavailable for this model".into()))?;
            Ok(HeatmapDocument {
                id: doc.id.clone(),
                tokens: record.tokens.clone(),
                word_weights: record.word_weights.clone(),
                lexicon_weights: record.lexicon_weights.clone(),
                predicted: ds.scheme.label_name(trace.predicted_class()).to_string(),
                gold: ds.scheme.label_name(doc.label).to_string(),
            })
        })
        .collect()
}

pub fn render_heatmap_csv(docs: &[HeatmapDocument]) -> String {
    let mut out = String::from("doc,token_index,token,channel,weight,predicted,gold\n");
    for doc in docs {
        let mut emit = |channel: &str, weights: &[f64]| {
            for (i, (tok, w)) in doc.tokens.iter().zip(weights).enumerate() {
                let _ = writeln!(
                    out,
                    "{},{i},{},{channel},{w},{},{}",
                    csv_field(&doc.id),
                    csv_field(tok),
                    csv_field(&doc.predicted),
                    csv_field(&doc.gold),
                );
            }
        };
        emit("word", &doc.word_weights);
        if let Some(lex) = &doc.lexicon_weights {
            emit("lexicon", lex);
        }
    }
    out
}

/// Inverse of [`render_heatmap_csv`]; provenance lines are skipped.
pub fn parse_heatmap_csv(text: &str, origin: &str) -> Result<Vec<HeatmapDocument>> {
    let mut docs: Vec<HeatmapDocument> = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let f = split_csv_line(line);
        if f.len() != 7 {
            return Err(Error::parse(origin, lineno, "expected 7 fields"));
        }
        let (id, token, channel, weight) = (&f[0], &f[2], &f[3], parse_f64(origin, lineno, &f[4])?);
        if docs.last().map(|d: &HeatmapDocument| &d.id) != Some(id) {
            docs.push(HeatmapDocument {
                id: id.clone(),
                tokens: Vec::new(),
                word_weights: Vec::new(),
                lexicon_weights: None,
                predicted: f[5].clone(),
                gold: f[6].clone(),
            });
        }
        let doc = docs.last_mut().unwrap();
        match channel.as_str() {
            "word" => {
                doc.tokens.push(token.clone());
                doc.word_weights.push(weight);
            }
            "lexicon" => doc
                .lexicon_weights
                .get_or_insert_with(Vec::new)
                .push(weight),
            other => {
                return Err(Error::parse(origin, lineno, format!("bad channel `{other}`")))
            }
        }
    }
    Ok(docs)
}

fn heat_color(weight: f64) -> (u8, u8, u8) {
    // neutral gray at 0, linearly toward red for positive and blue for
    // negative weights
    let gray = (224.0, 224.0, 224.0);
    let target = if weight >= 0.0 {
        (255.0, 32.0, 32.0)
    } else {
        (32.0, 32.0, 255.0)
    };
    let t = weight.abs().min(1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    (
        lerp(gray.0, target.0),
        lerp(gray.1, target.1),
        lerp(gray.2, target.2),
    )
}

fn html_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn render_token_row(out: &mut String, label: &str, tokens: &[String], weights: &[f64]) {
    let _ = write!(out, "<p class=\"tokens\"><span class=\"space\">{label}</span>");
    for (tok, &w) in tokens.iter().zip(weights) {
        let (r, g, b) = heat_color(w);
        let _ = write!(
            out,
            "<span class=\"tok\" style=\"background-color:rgb({r},{g},{b})\" title=\"{w:.4}\">{}</span> ",
            html_escape(tok)
        );
    }
    out.push_str("</p>\n");
}

/// One self-contained page: a colored span per non-padding token, red for
/// positive attention, blue for negative, gray near zero, plus a legend.
pub fn render_heatmap_html(docs: &[HeatmapDocument], title: &str) -> String {
    let mut out = String::new();
    out.push_str("<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n");
    let _ = writeln!(out, "<title>{}</title>", html_escape(title));
    out.push_str(
        "<style>\n\
         body { font-family: sans-serif; margin: 2em; }\n\
         .doc { margin-bottom: 1.2em; }\n\
         .meta { color: #555; font-size: 0.85em; margin-bottom: 0.2em; }\n\
         .tok { padding: 1px 4px; margin: 1px; border-radius: 3px; display: inline-block; }\n\
         .space { color: #999; font-size: 0.8em; margin-right: 0.6em; }\n\
         .legend span { padding: 1px 8px; margin: 1px; }\n\
         </style></head>\n<body>\n",
    );
    let _ = writeln!(out, "<h1>{}</h1>", html_escape(title));
    out.push_str("<p class=\"legend\">attention \u{2212}1 ");
    for i in 0..=10 {
        let w = -1.0 + 0.2 * i as f64;
        let (r, g, b) = heat_color(w);
        let _ = write!(out, "<span style=\"background-color:rgb({r},{g},{b})\">&nbsp;</span>");
    }
    out.push_str(" +1</p>\n");
    for doc in docs {
        let _ = writeln!(
            out,
            "<div class=\"doc\"><div class=\"meta\">{} &mdash; predicted {}, gold {}</div>",
            html_escape(&doc.id),
            html_escape(&doc.predicted),
            html_escape(&doc.gold)
        );
        render_token_row(&mut out, "word", &doc.tokens, &doc.word_weights);
        if let Some(lex) = &doc.lexicon_weights {
            render_token_row(&mut out, "lexicon", &doc.tokens, lex);
        }
        out.push_str("</div>\n");
    }
    out.push_str("</body></html>\n");
    out
}

/// Writes a heatmap file; `header` is prepended to CSV output and becomes
/// an HTML comment for pages.
pub fn heatmap_export(
    docs: &[HeatmapDocument],
    header: &str,
    format: HeatmapFormat,
    path: &Path,
) -> Result<()> {
    let contents = match format {
        HeatmapFormat::Csv => format!("{header}{}", render_heatmap_csv(docs)),
        HeatmapFormat::Html => {
            let comment = if header.is_empty() {
                String::new()
            } else {
                format!("<!--\n{header}-->\n")
            };
            format!("{comment}{}", render_heatmap_html(docs, "attention heatmap"))
        }
    };
    write_file(path, &contents)
}

// --- training history --------------------------------------------------------

/// Per-epoch history CSV. Wall-clock timings are deliberately omitted so
/// identical runs serialize identically.
pub fn render_history_csv(history: &TrainHistory, header: &str) -> String {
    let mut out = String::from(header);
    let _ = writeln!(out, "# best_epoch = {}", history.best_epoch);
    out.push_str("epoch,train_loss,dev_metric\n");
    for e in &history.epochs {
        let _ = writeln!(out, "{},{},{}", e.epoch, e.train_loss, e.dev_metric);
    }
    out
}

pub fn history_export(history: &TrainHistory, header: &str, path: &Path) -> Result<()> {
    write_file(path, &render_history_csv(history, header))
}

/// Inverse of [`render_history_csv`] up to wall-clock timings, which the
/// file format deliberately drops; parsed records carry 0 seconds.
pub fn parse_history_csv(text: &str, origin: &str) -> Result<TrainHistory> {
    let mut epochs = Vec::new();
    let mut best_epoch = None;
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if let Some(rest) = line.strip_prefix("# best_epoch = ") {
            best_epoch = Some(rest.parse().map_err(|_| {
                Error::parse(origin, lineno, "bad best_epoch")
            })?);
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let f = split_csv_line(line);
        if f.len() != 3 {
            return Err(Error::parse(origin, lineno, "expected 3 fields"));
        }
        epochs.push(crate::training::EpochRecord {
            epoch: f[0]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, "bad epoch"))?,
            train_loss: parse_f64(origin, lineno, &f[1])?,
            dev_metric: parse_f64(origin, lineno, &f[2])?,
            seconds: 0.0,
        });
    }
    let best_epoch =
        best_epoch.ok_or_else(|| Error::Data(format!("{origin}: missing best_epoch")))?;
    if best_epoch == 0 || best_epoch > epochs.len() {
        return Err(Error::Data(format!("{origin}: best_epoch out of range")));
    }
    Ok(TrainHistory { epochs, best_epoch })
}

// --- learning curves ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub variant: String,
    pub epoch: usize,
    pub mean_dev_metric: f64,
    pub per_seed: Vec<f64>,
}

/// Epoch-wise mean dev metric per variant plus the per-seed values.
/// Histories of unequal length are truncated to the variant's shortest run
/// and the header gains a warning flag.
pub fn render_curves_csv(
    curves: &[(String, Vec<TrainHistory>)],
    header: &str,
) -> Result<String> {
    if curves.iter().any(|(_, hs)| hs.is_empty()) {
        return Err(Error::Data("every variant needs at least one history".into()));
    }
    let max_runs = curves.iter().map(|(_, hs)| hs.len()).max().unwrap_or(0);
    let truncated = curves
        .iter()
        .any(|(_, hs)| hs.iter().any(|h| h.epochs.len() != hs[0].epochs.len()));

    let mut out = String::from(header);
    if truncated {
        out.push_str("# warning = histories_truncated_to_shortest\n");
    }
    out.push_str("variant,epoch,mean_dev_metric");
    for i in 1..=max_runs {
        let _ = write!(out, ",run{i}");
    }
    out.push('\n');
    for (variant, histories) in curves {
        let shortest = histories.iter().map(|h| h.epochs.len()).min().unwrap();
        for row in 0..shortest {
            let values: Vec<f64> = histories
                .iter()
                .map(|h| h.epochs[row].dev_metric)
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let _ = write!(
                out,
                "{},{},{mean}",
                csv_field(variant),
                histories[0].epochs[row].epoch
            );
            for v in &values {
                let _ = write!(out, ",{v}");
            }
            for _ in values.len()..max_runs {
                out.push(',');
            }
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn curves_export(
    curves: &[(String, Vec<TrainHistory>)],
    header: &str,
    path: &Path,
) -> Result<()> {
    write_file(path, &render_curves_csv(curves, header)?)
}

pub fn parse_curves_csv(text: &str, origin: &str) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let f = split_csv_line(line);
        if f.len() < 3 {
            return Err(Error::parse(origin, lineno, "expected at least 3 fields"));
        }
        let per_seed = f[3..]
            .iter()
            .filter(|s| !s.is_empty())
            .map(|s| parse_f64(origin, lineno, s))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(CurveRow {
            variant: f[0].clone(),
            epoch: f[1]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, "bad epoch"))?,
            mean_dev_metric: parse_f64(origin, lineno, &f[2])?,
            per_seed,
        });
    }
    Ok(rows)
}

// --- group box statistics ----------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRow {
    pub variant: String,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub outliers: Vec<f64>,
    pub n: usize,
}

/// `variant,median,q25,q75,outliers,n` with outliers semicolon-joined.
/// Variants whose every run aborted carry no statistics and are skipped.
pub fn render_boxstats_csv(stats: &GroupStats, header: &str) -> String {
    let mut out = String::from(header);
    out.push_str("variant,median,q25,q75,outliers,n\n");
    for group in &stats.groups {
        let Some(bs) = &group.stats else { continue };
        let outliers = bs
            .outliers
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let _ = writeln!(
            out,
            "{},{},{},{},{outliers},{}",
            csv_field(&group.variant),
            bs.median,
            bs.q25,
            bs.q75,
            group.seed_scores.len()
        );
    }
    out
}

pub fn boxstats_export(stats: &GroupStats, header: &str, path: &Path) -> Result<()> {
    write_file(path, &render_boxstats_csv(stats, header))
}

pub fn parse_boxstats_csv(text: &str, origin: &str) -> Result<Vec<BoxRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            continue;
        }
        let f = split_csv_line(line);
        if f.len() != 6 {
            return Err(Error::parse(origin, lineno, "expected 6 fields"));
        }
        let outliers = if f[4].is_empty() {
            Vec::new()
        } else {
            f[4].split(';')
                .map(|s| parse_f64(origin, lineno, s))
                .collect::<Result<Vec<f64>>>()?
        };
        rows.push(BoxRow {
            variant: f[0].clone(),
            median: parse_f64(origin, lineno, &f[1])?,
            q25: parse_f64(origin, lineno, &f[2])?,
            q75: parse_f64(origin, lineno, &f[3])?,
            outliers,
            n: f[5]
                .parse()
                .map_err(|_| Error::parse(origin, lineno, "bad count"))?,
        });
    }
    Ok(rows)
}

// --- single metric rows ------------------------------------------------------

/// Machine-readable evaluation row.
pub fn render_metric_csv(
    variant: &str,
    seed: u64,
    metric: &str,
    value: f64,
    header: &str,
) -> String {
    format!("{header}variant,seed,metric,value\n{},{seed},{metric},{value}\n", csv_field(variant))
}

// --- embedding size sweep ----------------------------------------------------

/// Reference stability values reported alongside the sweep, for orientation
/// only: standard deviations of 0.8491 (word-only baseline) versus 0.4208
/// (lexicon-integrated) were measured on the original micro-blog benchmark.
pub const REFERENCE_STD_BASELINE_S16: f64 = 0.8491;
pub const REFERENCE_STD_LEXICON_S16: f64 = 0.4208;

/// `variant,dimension,mean_score,scores,std_across_sizes` with per-run
/// scores semicolon-joined; the variant's std repeats on each of its rows.
pub fn render_sweep_csv(stats: &crate::training::SweepStats, header: &str) -> String {
    let mut out = String::from(header);
    let _ = writeln!(out, "# reference_std_baseline = {REFERENCE_STD_BASELINE_S16}");
    let _ = writeln!(out, "# reference_std_lexicon = {REFERENCE_STD_LEXICON_S16}");
    out.push_str("variant,dimension,mean_score,scores,std_across_sizes\n");
    for v in &stats.variants {
        for size in &v.per_size {
            let scores = size
                .scores
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(";");
            let _ = writeln!(
                out,
                "{},{},{},{scores},{}",
                csv_field(&v.variant),
                size.dimension,
                size.mean,
                v.std_across_sizes
            );
        }
    }
    out
}

pub fn sweep_export(
    stats: &crate::training::SweepStats,
    header: &str,
    path: &Path,
) -> Result<()> {
    write_file(path, &render_sweep_csv(stats, header))
}
