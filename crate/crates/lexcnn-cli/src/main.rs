//! `lexcnn` — train, evaluate and analyze lexicon-integrated convolutional
//! sentiment classifiers from the command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data/configuration error,
//! 3 numeric failure (divergence or a failed check).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use lexcnn::corpus::{dataset_stats, load_dataset, Dataset, LabelScheme, Split};
use lexcnn::embeddings::{
    build_lexicon_table, coverage, load_lexicon_table, load_word_embeddings, save_lexicon_table,
    LexiconTable, WordEmbeddingTable,
};
use lexcnn::error::Error;
use lexcnn::eval::Metric;
use lexcnn::model::{load_checkpoint, parse_variant, save_checkpoint, Checkpoint, Mode};
use lexcnn::provenance::{header, InputRef};
use lexcnn::report::{
    boxstats_export, curves_export, heatmap_documents, heatmap_export, history_export,
    render_metric_csv, sweep_export, HeatmapFormat,
};
use lexcnn::training::{
    embedding_size_sweep, evaluate_model, grad_check, group_run, predict_traces, train, GroupData,
    TrainConfig,
};

#[derive(Parser)]
#[command(name = "lexcnn", version, about = "Lexicon-integrated convolutional sentiment classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a lexicon table from one or more lexicon source files
    BuildLexicon(BuildLexiconArgs),
    /// Report word-type coverage of tables over a dataset
    Coverage(CoverageArgs),
    /// Train one model and write a checkpoint plus history CSV
    Train(TrainArgs),
    /// Score a trained model on a test set
    Evaluate(EvaluateArgs),
    /// Train every (variant, seed) pair and write group box statistics
    GroupRun(GroupRunArgs),
    /// Train across embedding sizes and report the stability statistic
    Sweep(SweepArgs),
    /// Export attention heatmaps for a trained model
    Heatmap(HeatmapArgs),
    /// Check analytic gradients against central finite differences
    GradCheck(GradCheckArgs),
}

#[derive(Args)]
struct ConfigOverrides {
    /// Flat `key = value` config file; flags override file values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Integration mode: base, nc, mc or sc
    #[arg(long)]
    mode: Option<String>,
    /// Append embedding attention vectors to the penultimate layer
    #[arg(long)]
    eav: Option<bool>,
    /// Random seed for initialization, shuffling and dropout
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` setting; repeatable, applied after --config
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

impl ConfigOverrides {
    fn build(&self) -> Result<TrainConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::io(path.display().to_string(), e))?;
                TrainConfig::from_kv_text(&text, &path.display().to_string())?
            }
            None => TrainConfig::default(),
        };
        for set in &self.sets {
            let (key, value) = set
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects key=value, got `{set}`")))?;
            cfg.apply(key.trim(), value.trim())?;
        }
        if let Some(mode) = &self.mode {
            cfg.apply("mode", mode)?;
        }
        if let Some(eav) = self.eav {
            cfg.apply("eav", &eav.to_string())?;
        }
        if let Some(seed) = self.seed {
            cfg.apply("seed", &seed.to_string())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct BuildLexiconArgs {
    /// Output path for the serialized lexicon table
    #[arg(long)]
    out: PathBuf,
    /// Lexicon source files, concatenated in the given order
    #[arg(long, num_args = 1.., required = true)]
    sources: Vec<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    /// Dataset file to measure coverage on
    #[arg(long)]
    data: PathBuf,
    /// Label scheme: 3 or 5
    #[arg(long, default_value = "3")]
    scheme: String,
    /// Word embedding file
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Serialized lexicon table
    #[arg(long)]
    lex: Option<PathBuf>,
    /// Seed for out-of-vocabulary fallback vectors
    #[arg(long, default_value_t = 1)]
    oov_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training set
    #[arg(long)]
    trn: PathBuf,
    /// Development set for early stopping
    #[arg(long)]
    dev: PathBuf,
    /// Word embedding file
    #[arg(long)]
    emb: PathBuf,
    /// Serialized lexicon table (required for nc, mc and sc)
    #[arg(long)]
    lex: Option<PathBuf>,
    /// Label scheme: 3 or 5
    #[arg(long, default_value = "3")]
    scheme: String,
    /// Checkpoint output path
    #[arg(long, default_value = "model.ckpt")]
    out: PathBuf,
    /// History CSV output path
    #[arg(long)]
    history: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Trained checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Test set
    #[arg(long)]
    tst: PathBuf,
    /// Metric: avgf1 or acc
    #[arg(long)]
    metric: String,
    /// Word embedding file; defaults to the path recorded in the checkpoint
    #[arg(long)]
    emb: Option<PathBuf>,
    /// Lexicon table; defaults to the path recorded in the checkpoint
    #[arg(long)]
    lex: Option<PathBuf>,
    /// Also append a machine-readable CSV row here
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct GroupRunArgs {
    #[arg(long)]
    trn: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Scored on this set when given, on dev otherwise
    #[arg(long)]
    tst: Option<PathBuf>,
    #[arg(long)]
    emb: PathBuf,
    #[arg(long)]
    lex: Option<PathBuf>,
    #[arg(long, default_value = "3")]
    scheme: String,
    /// Seeds, e.g. `1..10` or `1,2,3`
    #[arg(long, default_value = "1..10")]
    seeds: String,
    /// Comma-separated variant names
    #[arg(long, default_value = "base,nc,mc,sc,nc-eav,mc-eav,sc-eav")]
    variants: String,
    /// Box-statistics CSV output path
    #[arg(long)]
    out: PathBuf,
    /// Optional learning-curve CSV output path
    #[arg(long)]
    curves: Option<PathBuf>,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    trn: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    #[arg(long)]
    tst: Option<PathBuf>,
    /// One embedding file per size
    #[arg(long, num_args = 1.., required = true)]
    embs: Vec<PathBuf>,
    #[arg(long)]
    lex: Option<PathBuf>,
    #[arg(long, default_value = "3")]
    scheme: String,
    /// Training runs (seeds 1..=N) per embedding size
    #[arg(long, default_value_t = 1)]
    runs: usize,
    /// Comma-separated variant names
    #[arg(long, default_value = "base,sc")]
    variants: String,
    /// Sweep CSV output path
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: ConfigOverrides,
}

#[derive(Args)]
struct HeatmapArgs {
    /// Trained checkpoint (must have attention enabled)
    #[arg(long)]
    model: PathBuf,
    /// Documents to visualize
    #[arg(long)]
    docs: PathBuf,
    /// Output format: html or csv
    #[arg(long, default_value = "html")]
    format: String,
    /// Output path
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    emb: Option<PathBuf>,
    #[arg(long)]
    lex: Option<PathBuf>,
}

#[derive(Args)]
struct GradCheckArgs {
    /// Variant to check, e.g. `sc-eav`
    #[arg(long, default_value = "sc-eav")]
    mode: String,
    /// Central-difference epsilon
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    /// Probe seed
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Failure threshold on the max relative error
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            return match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{err}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{err}");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Numeric(_) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::BuildLexicon(args) => cmd_build_lexicon(args),
        Command::Coverage(args) => cmd_coverage(args),
        Command::Train(args) => cmd_train(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::GroupRun(args) => cmd_group_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Heatmap(args) => cmd_heatmap(args),
        Command::GradCheck(args) => cmd_grad_check(args),
    }
}

fn echo(pairs: &[(String, String)]) {
    for (k, v) in pairs {
        println!("{k} = {v}");
    }
}

fn kv(key: &str, value: impl ToString) -> (String, String) {
    (key.to_string(), value.to_string())
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Error> {
    let spec = spec.trim();
    if let Some((lo, hi)) = spec.split_once("..") {
        let lo: u64 = lo
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad seed range `{spec}`")))?;
        let hi: u64 = hi
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad seed range `{spec}`")))?;
        if hi < lo {
            return Err(Error::Config(format!("empty seed range `{spec}`")));
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad seed `{s}`")))
        })
        .collect()
}

fn parse_variants(spec: &str) -> Result<Vec<(Mode, bool)>, Error> {
    spec.split(',')
        .map(|s| parse_variant(s.trim()))
        .collect()
}

fn load_data(path: &Path, scheme: LabelScheme, split: Split) -> Result<Dataset, Error> {
    let ds = load_dataset(path, scheme, split)?;
    let stats = dataset_stats(&ds);
    let labels: Vec<String> = scheme
        .labels()
        .iter()
        .zip(&stats.counts)
        .map(|(l, c)| format!("{l}:{c}"))
        .collect();
    println!("loaded.{split} = {} documents ({})", stats.total, labels.join(" "));
    Ok(ds)
}

fn load_tables(
    emb_path: &Path,
    lex_path: Option<&Path>,
    oov_seed: u64,
) -> Result<(WordEmbeddingTable, Option<LexiconTable>), Error> {
    let emb = load_word_embeddings(emb_path, oov_seed)?;
    if emb.duplicates > 0 {
        eprintln!("warning: {} duplicate words in {}", emb.duplicates, emb_path.display());
    }
    let lex = lex_path.map(load_lexicon_table).transpose()?;
    Ok((emb, lex))
}

fn cmd_build_lexicon(args: BuildLexiconArgs) -> Result<(), Error> {
    let table = build_lexicon_table(&args.sources)?;
    let mut config = vec![kv("command", "build-lexicon"), kv("width", table.width())];
    for (name, range) in table.spans() {
        config.push(kv(&format!("span.{name}"), format!("{}..{}", range.start, range.end)));
    }
    let inputs = args
        .sources
        .iter()
        .enumerate()
        .map(|(i, p)| InputRef::from_file(&format!("source{i}"), p))
        .collect::<Result<Vec<_>, _>>()?;
    save_lexicon_table(&table, &header(&config, &inputs), &args.out)?;
    echo(&config);
    println!("entries = {}", table.len());
    println!("written = {}", args.out.display());
    Ok(())
}

fn cmd_coverage(args: CoverageArgs) -> Result<(), Error> {
    if args.emb.is_none() && args.lex.is_none() {
        return Err(Error::Config("coverage needs --emb and/or --lex".into()));
    }
    let scheme = LabelScheme::parse(&args.scheme)?;
    let ds = load_data(&args.data, scheme, Split::Tst)?;
    echo(&[kv("command", "coverage"), kv("scheme", scheme), kv("data", args.data.display())]);
    if let Some(path) = &args.emb {
        let emb = load_word_embeddings(path, args.oov_seed)?;
        println!("coverage.word = {:.2}", coverage(|w| emb.contains(w), &ds)?);
    }
    if let Some(path) = &args.lex {
        let lex = load_lexicon_table(path)?;
        println!("coverage.lexicon = {:.2}", coverage(|w| lex.contains(w), &ds)?);
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), Error> {
    let cfg = args.overrides.build()?;
    let scheme = LabelScheme::parse(&args.scheme)?;
    echo(&cfg.echo());
    let trn = load_data(&args.trn, scheme, Split::Trn)?;
    let dev = load_data(&args.dev, scheme, Split::Dev)?;
    let (emb, lex) = load_tables(&args.emb, args.lex.as_deref(), cfg.oov_seed)?;

    let (params, history) = train(&trn, &dev, &emb, lex.as_ref(), &cfg)?;

    let mut inputs = vec![
        InputRef::from_file("trn", &args.trn)?,
        InputRef::from_file("dev", &args.dev)?,
        InputRef::from_file("emb", &args.emb)?,
    ];
    if let Some(path) = &args.lex {
        inputs.push(InputRef::from_file("lex", path)?);
    }
    let head = header(&cfg.echo(), &inputs);

    let checkpoint = Checkpoint {
        params,
        scheme,
        oov_seed: cfg.oov_seed,
        emb_vocab_hash: emb.vocab_hash(),
        lex_vocab_hash: lex.as_ref().map(LexiconTable::vocab_hash),
        emb_path: Some(args.emb.display().to_string()),
        lex_path: args.lex.as_ref().map(|p| p.display().to_string()),
        extra: cfg.echo(),
    };
    save_checkpoint(&checkpoint, &head, &args.out)?;
    if let Some(path) = &args.history {
        history_export(&history, &head, path)?;
        println!("history = {}", path.display());
    }
    println!("best_epoch = {}", history.best_epoch);
    println!("best_dev_metric = {}", history.best_dev_metric());
    println!("epochs_run = {}", history.epochs.len());
    println!("checkpoint = {}", args.out.display());
    Ok(())
}

/// Table resolution for commands that run a saved model: explicit flags
/// win, then the paths recorded in the checkpoint.
fn tables_for_checkpoint(
    ckpt: &Checkpoint,
    emb_flag: Option<&Path>,
    lex_flag: Option<&Path>,
) -> Result<(WordEmbeddingTable, Option<LexiconTable>), Error> {
    let emb_path = emb_flag
        .map(Path::to_path_buf)
        .or_else(|| ckpt.emb_path.as_ref().map(PathBuf::from))
        .ok_or_else(|| {
            Error::Config("no --emb given and the checkpoint records no embedding path".into())
        })?;
    let emb = load_word_embeddings(&emb_path, ckpt.oov_seed)?;
    if emb.vocab_hash() != ckpt.emb_vocab_hash {
        return Err(Error::Data(format!(
            "embedding vocabulary of {} differs from the one the model was trained with",
            emb_path.display()
        )));
    }
    let lex = if ckpt.params.config.mode.uses_lexicon() {
        let lex_path = lex_flag
            .map(Path::to_path_buf)
            .or_else(|| ckpt.lex_path.as_ref().map(PathBuf::from))
            .ok_or_else(|| {
                Error::Config("no --lex given and the checkpoint records no lexicon path".into())
            })?;
        let table = load_lexicon_table(&lex_path)?;
        if let Some(hash) = ckpt.lex_vocab_hash {
            if table.vocab_hash() != hash {
                return Err(Error::Data(format!(
                    "lexicon vocabulary of {} differs from the one the model was trained with",
                    lex_path.display()
                )));
            }
        }
        Some(table)
    } else {
        None
    };
    Ok((emb, lex))
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), Error> {
    let metric = Metric::parse(&args.metric)?;
    let ckpt = load_checkpoint(&args.model)?;
    echo(&ckpt.extra);
    let tst = load_data(&args.tst, ckpt.scheme, Split::Tst)?;
    let (emb, lex) = tables_for_checkpoint(&ckpt, args.emb.as_deref(), args.lex.as_deref())?;
    let cm = evaluate_model(&tst, &ckpt.params, &emb, lex.as_ref())?;
    let value = metric.compute(&cm)?;
    let variant = lexcnn::model::variant_name(ckpt.params.config.mode, ckpt.params.config.eav);
    let seed = ckpt
        .extra
        .iter()
        .find(|(k, _)| k == "seed")
        .map(|(_, v)| v.parse().unwrap_or(0))
        .unwrap_or(0);
    println!("variant = {variant}");
    println!("metric = {metric}");
    println!("{metric} = {value}");
    if let Some(path) = &args.csv {
        let inputs = [
            InputRef::from_file("model", &args.model)?,
            InputRef::from_file("tst", &args.tst)?,
        ];
        let head = header(&ckpt.extra, &inputs);
        std::fs::write(path, render_metric_csv(&variant, seed, &metric.to_string(), value, &head))
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        println!("csv = {}", path.display());
    }
    Ok(())
}

fn cmd_group_run(args: GroupRunArgs) -> Result<(), Error> {
    let base = args.overrides.build()?;
    let scheme = LabelScheme::parse(&args.scheme)?;
    let seeds = parse_seeds(&args.seeds)?;
    let variants = parse_variants(&args.variants)?;
    echo(&base.echo());
    println!("seeds = {}", args.seeds);
    println!("variants = {}", args.variants);

    let trn = load_data(&args.trn, scheme, Split::Trn)?;
    let dev = load_data(&args.dev, scheme, Split::Dev)?;
    let tst = args
        .tst
        .as_ref()
        .map(|p| load_data(p, scheme, Split::Tst))
        .transpose()?;
    let (emb, lex) = load_tables(&args.emb, args.lex.as_deref(), base.oov_seed)?;

    let result = group_run(
        &base,
        &variants,
        &seeds,
        &GroupData {
            trn: &trn,
            dev: &dev,
            tst: tst.as_ref(),
            emb: &emb,
            lex: lex.as_ref(),
        },
    )?;

    let mut config = base.echo();
    config.push(kv("seeds", &args.seeds));
    config.push(kv("variants", &args.variants));
    let mut inputs = vec![
        InputRef::from_file("trn", &args.trn)?,
        InputRef::from_file("dev", &args.dev)?,
        InputRef::from_file("emb", &args.emb)?,
    ];
    if let Some(path) = &args.tst {
        inputs.push(InputRef::from_file("tst", path)?);
    }
    if let Some(path) = &args.lex {
        inputs.push(InputRef::from_file("lex", path)?);
    }
    let head = header(&config, &inputs);
    boxstats_export(&result.stats, &head, &args.out)?;
    println!("boxstats = {}", args.out.display());
    if let Some(path) = &args.curves {
        curves_export(&result.histories, &head, path)?;
        println!("curves = {}", path.display());
    }
    for group in &result.stats.groups {
        match &group.stats {
            Some(bs) => println!(
                "group.{} = median {} q25 {} q75 {} (n={}, failures={})",
                group.variant,
                bs.median,
                bs.q25,
                bs.q75,
                group.seed_scores.len(),
                group.failures
            ),
            None => println!("group.{} = all {} runs failed", group.variant, group.failures),
        }
    }
    if result.stats.warnings > 0 {
        eprintln!("warning: {} runs aborted and were excluded", result.stats.warnings);
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), Error> {
    let base = args.overrides.build()?;
    let scheme = LabelScheme::parse(&args.scheme)?;
    let variants = parse_variants(&args.variants)?;
    echo(&base.echo());
    let trn = load_data(&args.trn, scheme, Split::Trn)?;
    let dev = load_data(&args.dev, scheme, Split::Dev)?;
    let tst = args
        .tst
        .as_ref()
        .map(|p| load_data(p, scheme, Split::Tst))
        .transpose()?;
    let lex = args.lex.as_deref().map(load_lexicon_table).transpose()?;

    let stats = embedding_size_sweep(
        &base,
        &variants,
        &args.embs,
        args.runs,
        &trn,
        &dev,
        tst.as_ref(),
        lex.as_ref(),
    )?;

    let mut config = base.echo();
    config.push(kv("variants", &args.variants));
    config.push(kv("runs_per_size", args.runs));
    let mut inputs = vec![
        InputRef::from_file("trn", &args.trn)?,
        InputRef::from_file("dev", &args.dev)?,
    ];
    for (i, path) in args.embs.iter().enumerate() {
        inputs.push(InputRef::from_file(&format!("emb{i}"), path)?);
    }
    let head = header(&config, &inputs);
    sweep_export(&stats, &head, &args.out)?;
    for v in &stats.variants {
        println!("sweep.{}.std_across_sizes = {}", v.variant, v.std_across_sizes);
    }
    println!("sweep = {}", args.out.display());
    Ok(())
}

fn cmd_heatmap(args: HeatmapArgs) -> Result<(), Error> {
    let format = HeatmapFormat::parse(&args.format)?;
    let ckpt = load_checkpoint(&args.model)?;
    echo(&ckpt.extra);
    let docs = load_data(&args.docs, ckpt.scheme, Split::Tst)?;
    let (emb, lex) = tables_for_checkpoint(&ckpt, args.emb.as_deref(), args.lex.as_deref())?;
    let traces = predict_traces(&docs, &ckpt.params, &emb, lex.as_ref())?;
    let records = heatmap_documents(&docs, &traces)?;
    let inputs = [
        InputRef::from_file("model", &args.model)?,
        InputRef::from_file("docs", &args.docs)?,
    ];
    heatmap_export(&records, &header(&ckpt.extra, &inputs), format, &args.out)?;
    println!("documents = {}", records.len());
    println!("heatmap = {}", args.out.display());
    Ok(())
}

fn cmd_grad_check(args: GradCheckArgs) -> Result<(), Error> {
    let (mode, eav) = parse_variant(&args.mode)?;
    let mut cfg = TrainConfig::default();
    cfg.model.mode = mode;
    cfg.model.eav = eav;
    echo(&[
        kv("command", "grad-check"),
        kv("variant", &args.mode),
        kv("epsilon", args.epsilon),
        kv("tolerance", args.tolerance),
        kv("probe_seed", args.seed),
    ]);
    let report = grad_check(&cfg, args.seed, args.epsilon)?;
    for (group, err) in &report.groups {
        println!("gradcheck.{group} = {err:e}");
    }
    println!("gradcheck.max = {:e}", report.max_relative_error);
    println!("gradcheck.parameters = {}", report.parameter_count);
    if report.max_relative_error > args.tolerance {
        return Err(Error::Numeric(format!(
            "max relative error {:e} exceeds tolerance {:e}",
            report.max_relative_error, args.tolerance
        )));
    }
    Ok(())
}
