//! Seeded synthetic sentiment tasks.
//!
//! The generator builds small, fully reproducible 3-class corpora from two
//! word inventories:
//!
//! * *carrier* words decide a document's class. Each class owns a pool of
//!   carrier words (`pos00`, `neu03`, `neg07`, ...), and every document
//!   contains exactly one carrier of its class at a random position.
//! * *filler* words (`filler00`, ...) carry no class signal and fill the
//!   remaining positions.
//!
//! A document has a uniformly drawn length in `min_tokens ..= max_tokens`
//! and classes rotate round-robin, so the corpus is balanced. The lexicon
//! has one source with three columns, one per class: a carrier scores
//! `0.55 + 0.4u` in its own class column (`u` drawn per word) and small
//! jitter in `[-0.15, 0.15]` elsewhere, so carrier strengths vary; fillers
//! are absent from the lexicon.
//!
//! Word vectors mirror the geometry of distributional spaces: filler
//! vectors cluster around one shared direction (function words sit close
//! together in real embedding spaces), while carrier vectors — and the
//! fallback vectors of unknown words — are dispersed uniformly in
//! `[-0.25, 0.25]`.
//!
//! Two task presets matter for the test suites:
//!
//! * [`overfit_task`] — carriers are in the embedding vocabulary and every
//!   split draws from the same carrier pool. Any variant should fit it.
//! * [`lexicon_benefit_task`] — carriers are absent from the embedding
//!   vocabulary (only the lexicon knows them), and the dev/test splits use
//!   a carrier half never seen in training. Word-only models have nothing
//!   to generalize from, lexicon-integrated models do.

use std::fmt::Write as _;
use std::path::Path;

use crate::corpus::{Dataset, Document, LabelScheme, Split};
use crate::embeddings::{
    build_lexicon_table_from_sources, LexiconSource, LexiconTable, OovPolicy, WordEmbeddingTable,
};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub seed: u64,
    pub train_docs: usize,
    pub dev_docs: usize,
    pub test_docs: usize,
    /// Carrier pool size per class.
    pub carriers_per_class: usize,
    /// When false, train documents draw carriers from the first half of
    /// each pool and dev/test from the second half.
    pub shared_carriers: bool,
    /// When false, carriers are left out of the embedding vocabulary.
    pub carriers_in_embeddings: bool,
    pub fillers: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub embedding_dim: usize,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec {
            seed: 1,
            train_docs: 120,
            dev_docs: 60,
            test_docs: 60,
            carriers_per_class: 12,
            shared_carriers: true,
            carriers_in_embeddings: true,
            fillers: 40,
            min_tokens: 6,
            max_tokens: 12,
            embedding_dim: 16,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub train: Dataset,
    pub dev: Dataset,
    pub test: Dataset,
    pub embeddings: WordEmbeddingTable,
    pub lexicon: LexiconTable,
    pub lexicon_rows: Vec<(String, Vec<f64>)>,
    /// Carrier pools per class, in class order.
    pub carriers: Vec<Vec<String>>,
}

const CLASS_PREFIXES: [&str; 3] = ["pos", "neu", "neg"];

fn carrier_pools(per_class: usize) -> Vec<Vec<String>> {
    CLASS_PREFIXES
        .iter()
        .map(|p| (0..per_class).map(|i| format!("{p}{i:02}")).collect())
        .collect()
}

fn make_split(
    rng: &mut Rng,
    spec: &TaskSpec,
    carriers: &[Vec<String>],
    train_half: bool,
    count: usize,
    split: Split,
) -> Dataset {
    let fillers: Vec<String> = (0..spec.fillers).map(|i| format!("filler{i:02}")).collect();
    let documents = (0..count)
        .map(|i| {
            let label = i % 3;
            let pool = &carriers[label];
            let range = if spec.shared_carriers {
                0..pool.len()
            } else if train_half {
                0..pool.len() / 2
            } else {
                pool.len() / 2..pool.len()
            };
            let carrier = pool[range.start + rng.below(range.len())].clone();
            let len = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
            let mut tokens: Vec<String> = (0..len - 1)
                .map(|_| fillers[rng.below(fillers.len())].clone())
                .collect();
            tokens.insert(rng.below(len), carrier);
            Document {
                id: format!("{}-{i:04}", split.to_string().to_lowercase()),
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
}

pub fn generate(spec: &TaskSpec) -> Result<SyntheticTask> {
    if spec.min_tokens < 1 || spec.max_tokens < spec.min_tokens {
        return Err(Error::Config("bad token length range".into()));
    }
    if spec.carriers_per_class < 2 || spec.fillers == 0 {
        return Err(Error::Config("need at least 2 carriers per class and 1 filler".into()));
    }
    let carriers = carrier_pools(spec.carriers_per_class);

    let mut rng = Rng::new(spec.seed);
    let train = make_split(&mut rng, spec, &carriers, true, spec.train_docs, Split::Trn);
    let dev = make_split(&mut rng, spec, &carriers, false, spec.dev_docs, Split::Dev);
    let test = make_split(&mut rng, spec, &carriers, false, spec.test_docs, Split::Tst);

    // word vectors: fillers cluster, carriers disperse
    let mut emb = WordEmbeddingTable::new(
        spec.embedding_dim,
        OovPolicy::SeededUniform {
            seed: spec.seed ^ 0x00f,
        },
    );
    let mut erng = Rng::new(spec.seed ^ 0xe0e0);
    let filler_center: Vec<f64> = (0..spec.embedding_dim)
        .map(|_| erng.uniform(-0.2, 0.2))
        .collect();
    for i in 0..spec.fillers {
        let v = filler_center
            .iter()
            .map(|c| c + erng.uniform(-0.08, 0.08))
            .collect();
        emb.insert(format!("filler{i:02}"), v);
    }
    if spec.carriers_in_embeddings {
        for pool in &carriers {
            for w in pool {
                let v = (0..spec.embedding_dim)
                    .map(|_| erng.uniform(-0.25, 0.25))
                    .collect();
                emb.insert(w.clone(), v);
            }
        }
    }

    // lexicon scores: strong in the carrier's class column, jitter elsewhere
    let mut lrng = Rng::new(spec.seed ^ 0x1e81);
    let mut lexicon_rows = Vec::new();
    for (class, pool) in carriers.iter().enumerate() {
        for w in pool {
            let strength = 0.55 + 0.4 * lrng.next_f64();
            let scores: Vec<f64> = (0..3)
                .map(|c| {
                    if c == class {
                        strength
                    } else {
                        lrng.uniform(-0.15, 0.15)
                    }
                })
                .collect();
            lexicon_rows.push((w.clone(), scores));
        }
    }
    let lexicon = build_lexicon_table_from_sources(&[LexiconSource::from_rows(
        "synthetic",
        lexicon_rows.clone(),
    )?])?;

    Ok(SyntheticTask {
        train,
        dev,
        test,
        embeddings: emb,
        lexicon,
        lexicon_rows,
        carriers,
    })
}

/// 120 training documents with in-vocabulary carriers shared across splits.
pub fn overfit_task(seed: u64) -> SyntheticTask {
    generate(&TaskSpec {
        seed,
        ..TaskSpec::default()
    })
    .expect("default task spec is valid")
}

/// Carriers are out of the embedding vocabulary and the held-out splits use
/// carriers never seen in training; only the lexicon ties them together.
/// A smaller filler inventory in a wider space makes the filler cluster
/// cleanly separable for the attention filters.
pub fn lexicon_benefit_task(seed: u64) -> SyntheticTask {
    generate(&TaskSpec {
        seed,
        shared_carriers: false,
        carriers_in_embeddings: false,
        fillers: 12,
        embedding_dim: 32,
        ..TaskSpec::default()
    })
    .expect("default task spec is valid")
}

/// Serializes a dataset in the tab-separated corpus format.
pub fn write_dataset_tsv(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for doc in &ds.documents {
        let _ = writeln!(
            out,
            "{}\t{}\t{}",
            doc.id,
            ds.scheme.label_name(doc.label),
            doc.tokens.join(" ")
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Serializes lexicon rows as a lexicon source file.
pub fn write_lexicon_tsv(rows: &[(String, Vec<f64>)], path: &Path) -> Result<()> {
    let mut out = String::new();
    for (word, scores) in rows {
        let _ = write!(out, "{word}");
        for s in scores {
            let _ = write!(out, "\t{s}");
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes a seeded random embedding file of the given dimension over
/// `words`, in the textual `V d` format.
pub fn write_embedding_file(words: &[String], dim: usize, seed: u64, path: &Path) -> Result<()> {
    let mut rng = Rng::new(seed);
    let mut out = format!("{} {}\n", words.len(), dim);
    for w in words {
        let _ = write!(out, "{w}");
        for _ in 0..dim {
            let _ = write!(out, " {}", rng.uniform(-0.25, 0.25));
        }
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{dataset_stats, load_dataset};
    use crate::embeddings::load_word_embeddings;

    #[test]
    fn generation_is_deterministic() {
        let a = overfit_task(7);
        let b = overfit_task(7);
        assert_eq!(a.train.documents, b.train.documents);
        assert_eq!(a.test.documents, b.test.documents);
        assert_eq!(a.lexicon_rows, b.lexicon_rows);
        let c = overfit_task(8);
        assert_ne!(a.train.documents, c.train.documents);
    }

    #[test]
    fn corpus_is_balanced_and_sized() {
        let task = overfit_task(1);
        let stats = dataset_stats(&task.train);
        assert_eq!(stats.total, 120);
        assert_eq!(stats.counts, vec![40, 40, 40]);
        assert_eq!(task.dev.len(), 60);
        assert_eq!(task.test.len(), 60);
    }

    #[test]
    fn every_document_has_exactly_one_carrier_of_its_class() {
        let task = overfit_task(3);
        for ds in [&task.train, &task.dev, &task.test] {
            for doc in &ds.documents {
                let of_class = doc
                    .tokens
                    .iter()
                    .filter(|t| t.starts_with(CLASS_PREFIXES[doc.label]))
                    .count();
                let of_other: usize = (0..3)
                    .filter(|&c| c != doc.label)
                    .map(|c| {
                        doc.tokens
                            .iter()
                            .filter(|t| t.starts_with(CLASS_PREFIXES[c]))
                            .count()
                    })
                    .sum();
                assert_eq!(of_class, 1, "{:?}", doc.tokens);
                assert_eq!(of_other, 0);
            }
        }
    }

    #[test]
    fn lexicon_benefit_task_hides_carriers_from_embeddings() {
        let task = lexicon_benefit_task(1);
        for pool in &task.carriers {
            for w in pool {
                assert!(!task.embeddings.contains(w));
                assert!(task.lexicon.contains(w));
            }
        }
        // held-out carriers never appear in training documents
        let train_types: std::collections::HashSet<&str> =
            task.train.word_types().into_iter().collect();
        for ds in [&task.dev, &task.test] {
            for doc in &ds.documents {
                for tok in &doc.tokens {
                    if tok.starts_with("pos") || tok.starts_with("neu") || tok.starts_with("neg")
                    {
                        assert!(
                            !train_types.contains(tok.as_str()),
                            "held-out carrier {tok} leaked into training"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn lexicon_scores_favor_the_carrier_class() {
        let task = overfit_task(5);
        for (class, pool) in task.carriers.iter().enumerate() {
            for w in pool {
                let v = task.lexicon.vector(w);
                for c in 0..3 {
                    if c != class {
                        assert!(v[class] > v[c], "{w}: {v:?}");
                    }
                }
                assert!(v[class] >= 0.55);
            }
        }
    }

    #[test]
    fn written_files_reload_identically() {
        let task = overfit_task(9);
        let dir = std::env::temp_dir();
        let ds_path = dir.join("lexcnn-synth-ds.tsv");
        write_dataset_tsv(&task.train, &ds_path).unwrap();
        let reloaded = load_dataset(&ds_path, LabelScheme::Three, Split::Trn).unwrap();
        assert_eq!(reloaded.documents, task.train.documents);

        let emb_path = dir.join("lexcnn-synth-emb.txt");
        let words: Vec<String> = task.train.word_types().iter().map(|s| s.to_string()).collect();
        write_embedding_file(&words, 8, 3, &emb_path).unwrap();
        let table = load_word_embeddings(&emb_path, 1).unwrap();
        assert_eq!(table.dim(), 8);
        assert_eq!(table.len(), words.len());

        let lex_path = dir.join("lexcnn-synth-lex.tsv");
        write_lexicon_tsv(&task.lexicon_rows, &lex_path).unwrap();
        let table = crate::embeddings::build_lexicon_table(&[lex_path]).unwrap();
        assert_eq!(table.width(), 3);
        assert_eq!(table.vector("pos00"), task.lexicon.vector("pos00"));
    }
}
