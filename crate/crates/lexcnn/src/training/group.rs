//! Multi-seed group experiments and the embedding-size stability sweep.

use std::path::Path;

use crate::corpus::Dataset;
use crate::embeddings::{load_word_embeddings, LexiconTable, WordEmbeddingTable};
use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::model::{variant_name, Mode};
use crate::training::{train, evaluate_model, TrainConfig, TrainHistory};

/// Percentile by linear interpolation between closest ranks:
/// rank = p/100 · (n-1), interpolating between the floor and ceil entries
/// of the sorted sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of an empty sample");
    let rank = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median, quartiles and outliers beyond 1.5 × IQR.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxStats {
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(scores: &[f64]) -> Result<BoxStats> {
    if scores.is_empty() {
        return Err(Error::Data("box statistics of an empty sample".into()));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q25 = percentile(&sorted, 25.0);
    let median = percentile(&sorted, 50.0);
    let q75 = percentile(&sorted, 75.0);
    let iqr = q75 - q25;
    let (lo, hi) = (q25 - 1.5 * iqr, q75 + 1.5 * iqr);
    let outliers = sorted
        .iter()
        .copied()
        .filter(|&x| x < lo || x > hi)
        .collect();
    Ok(BoxStats {
        median,
        q25,
        q75,
        outliers,
    })
}

/// Population standard deviation.
pub fn population_std(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Results for one model variant across seeds.
#[derive(Debug, Clone)]
pub struct VariantGroup {
    pub variant: String,
    /// `(seed, score)` for every run that finished, in seed order.
    pub seed_scores: Vec<(u64, f64)>,
    /// `None` when every run failed.
    pub stats: Option<BoxStats>,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct GroupStats {
    pub metric: Metric,
    pub groups: Vec<VariantGroup>,
    /// Number of aborted runs across all variants; nonzero means some
    /// scores were excluded.
    pub warnings: usize,
}

/// Shared inputs for a group run.
pub struct GroupData<'a> {
    pub trn: &'a Dataset,
    pub dev: &'a Dataset,
    /// Scored on this set when present, on dev otherwise.
    pub tst: Option<&'a Dataset>,
    pub emb: &'a WordEmbeddingTable,
    pub lex: Option<&'a LexiconTable>,
}

pub struct GroupRunResult {
    pub stats: GroupStats,
    /// Histories of the finished runs, per variant, in seed order.
    pub histories: Vec<(String, Vec<TrainHistory>)>,
}

pub fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

/// Trains every `(variant, seed)` pair independently and summarizes the
/// per-seed scores. An aborted run is recorded and excluded rather than
/// retried, since a retry would change that seed's meaning.
pub fn group_run(
    base: &TrainConfig,
    variants: &[(Mode, bool)],
    seeds: &[u64],
    data: &GroupData,
) -> Result<GroupRunResult> {
    if seeds.len() < 2 {
        return Err(Error::Config(format!(
            "group analysis needs at least 2 seeds, got {}",
            seeds.len()
        )));
    }
    if variants.is_empty() {
        return Err(Error::Config("no variants given".into()));
    }
    let eval_set = data.tst.unwrap_or(data.dev);
    let metric = base.resolve_metric(data.trn.scheme);

    let mut groups = Vec::with_capacity(variants.len());
    let mut histories = Vec::with_capacity(variants.len());
    let mut warnings = 0usize;
    for &(mode, eav) in variants {
        let name = variant_name(mode, eav);
        let mut seed_scores = Vec::with_capacity(seeds.len());
        let mut variant_histories = Vec::new();
        let mut failures = 0usize;
        for &seed in seeds {
            let mut cfg = base.clone();
            cfg.model.mode = mode;
            cfg.model.eav = eav;
            cfg.seed = seed;
            match train(data.trn, data.dev, data.emb, data.lex, &cfg) {
                Ok((params, history)) => {
                    let cm = evaluate_model(eval_set, &params, data.emb, data.lex)?;
                    seed_scores.push((seed, metric.compute(&cm)?));
                    variant_histories.push(history);
                }
                Err(Error::Numeric(_)) => {
                    failures += 1;
                    warnings += 1;
                }
                Err(other) => return Err(other),
            }
        }
        let scores: Vec<f64> = seed_scores.iter().map(|&(_, s)| s).collect();
        groups.push(VariantGroup {
            variant: name.clone(),
            seed_scores,
            stats: if scores.is_empty() {
                None
            } else {
                Some(box_stats(&scores)?)
            },
            failures,
        });
        histories.push((name, variant_histories));
    }
    Ok(GroupRunResult {
        stats: GroupStats {
            metric,
            groups,
            warnings,
        },
        histories,
    })
}

/// Scores for one variant at one embedding size.
#[derive(Debug, Clone)]
pub struct SizeScore {
    pub dimension: usize,
    pub scores: Vec<f64>,
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct SweepVariant {
    pub variant: String,
    pub per_size: Vec<SizeScore>,
    /// Population standard deviation of the per-size mean scores; the
    /// stability statistic of the sweep.
    pub std_across_sizes: f64,
}

#[derive(Debug, Clone)]
pub struct SweepStats {
    pub metric: Metric,
    pub variants: Vec<SweepVariant>,
}

/// Trains each variant once per seed 1..=`runs_per_size` on every embedding
/// file and reports how much the mean score moves across embedding sizes.
#[allow(clippy::too_many_arguments)]
pub fn embedding_size_sweep(
    base: &TrainConfig,
    variants: &[(Mode, bool)],
    embedding_files: &[impl AsRef<Path>],
    runs_per_size: usize,
    trn: &Dataset,
    dev: &Dataset,
    tst: Option<&Dataset>,
    lex: Option<&LexiconTable>,
) -> Result<SweepStats> {
    if embedding_files.is_empty() {
        return Err(Error::Config("no embedding files given".into()));
    }
    if runs_per_size == 0 {
        return Err(Error::Config("runs per size must be positive".into()));
    }
    let tables: Vec<WordEmbeddingTable> = embedding_files
        .iter()
        .map(|p| load_word_embeddings(p.as_ref(), base.oov_seed))
        .collect::<Result<_>>()?;
    let eval_set = tst.unwrap_or(dev);
    let metric = base.resolve_metric(trn.scheme);

    let mut out = Vec::with_capacity(variants.len());
    for &(mode, eav) in variants {
        let mut per_size = Vec::with_capacity(tables.len());
        for emb in &tables {
            let mut scores = Vec::with_capacity(runs_per_size);
            for seed in 1..=runs_per_size as u64 {
                let mut cfg = base.clone();
                cfg.model.mode = mode;
                cfg.model.eav = eav;
                cfg.seed = seed;
                let (params, _) = train(trn, dev, emb, lex, &cfg)?;
                let cm = evaluate_model(eval_set, &params, emb, lex)?;
                scores.push(metric.compute(&cm)?);
            }
            let mean = scores.iter().sum::<f64>() / scores.len() as f64;
            per_size.push(SizeScore {
                dimension: emb.dim(),
                scores,
                mean,
            });
        }
        let means: Vec<f64> = per_size.iter().map(|s| s.mean).collect();
        out.push(SweepVariant {
            variant: variant_name(mode, eav),
            per_size,
            std_across_sizes: population_std(&means),
        });
    }
    Ok(SweepStats {
        metric,
        variants: out,
    })
}
