//! `mar` — the end-to-end pipeline CLI.
//!
//! Subcommands mirror the pipeline stages: `index`, `search`, `synthesize`,
//! `train`, `rerank`, `eval` and `noise-bench`. A TOML config file supplies
//! defaults; flags override it; one `--seed` governs every seeded component.
//! `MAR_THREADS` caps internal parallelism.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use mar::config::{load_config, PipelineConfig};
use mar::corpus::{build_triples, Corpus, QuerySet};
use mar::eval::{permutation_test, rerank, rrf, Metric, MetricReport};
use mar::experiment::{write_noise_bench, NoiseBenchConfig};
use mar::formats;
use mar::metatrain::{run_training, TrainMode};
use mar::ranker::RankerParams;
use mar::retrieval::{Bm25Params, InvertedIndex};
use mar::synthesis::synthesize;

#[derive(Parser)]
#[command(
    name = "mar",
    version,
    about = "weak-supervision synthesis and meta-reweighted ranking"
)]
struct Cli {
    /// TOML config file supplying defaults for all flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Seed for every random component.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build an inverted index and print collection statistics.
    Index(IndexArgs),
    /// BM25 retrieval: queries against a corpus, written as a TREC run.
    Search(SearchArgs),
    /// Synthesize contrastive weak-supervision triples for a corpus.
    Synthesize(SynthesizeArgs),
    /// Train a ranker on synthetic triples, meta-reweighted against judged
    /// target triples (or uniformly with --uniform).
    Train(TrainArgs),
    /// Rescore the top of a run with a trained ranker.
    Rerank(RerankArgs),
    /// Score runs against qrels; optionally compare two runs or fuse many.
    Eval(EvalArgs),
    /// The full noise-robustness experiment: generate, synthesize, corrupt,
    /// train meta and uniform, evaluate, report.
    NoiseBench(NoiseBenchArgs),
}

#[derive(Args)]
struct IndexArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Write the statistics as JSON here as well.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Retrieval depth.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value = "bm25")]
    tag: String,
    /// Run file to write (TREC format).
    #[arg(long, visible_alias = "save-run")]
    out: PathBuf,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    query_len: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Retrieval depth for confusable-pair mining.
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    pairs: Option<usize>,
    /// Triples file to write (JSONL).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Synthetic triples (JSONL).
    #[arg(long)]
    triples: PathBuf,
    #[arg(long)]
    qrels: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    /// First-stage run supplying target-triple candidates.
    #[arg(long)]
    run: PathBuf,
    /// Train with uniform weights instead of meta-reweighting.
    #[arg(long)]
    uniform: bool,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out_checkpoint: PathBuf,
    /// Weight log CSV.
    #[arg(long)]
    out_weights: Option<PathBuf>,
}

#[derive(Args)]
struct RerankArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    queries: Option<PathBuf>,
    #[arg(long)]
    run: PathBuf,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long, default_value = "rerank")]
    tag: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    qrels: Option<PathBuf>,
    /// Run to evaluate.
    #[arg(long)]
    run: PathBuf,
    /// Second run: evaluate it too and add a paired permutation test.
    #[arg(long)]
    compare: Option<PathBuf>,
    /// Fuse the main run with these runs by reciprocal rank and evaluate
    /// the fusion.
    #[arg(long, num_args = 1..)]
    rrf: Vec<PathBuf>,
    #[arg(long)]
    rrf_k: Option<f64>,
    /// Metric names (ndcg, err, p).
    #[arg(long, value_delimiter = ',')]
    metrics: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    n_perm: Option<usize>,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the fused run here (with --rrf).
    #[arg(long)]
    out_fused: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseBenchArgs {
    /// Output directory for every artifact and the reports.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    topics: Option<usize>,
    #[arg(long)]
    docs_per_topic: Option<usize>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    vocab: Option<usize>,
    #[arg(long)]
    doc_len: Option<usize>,
    /// Pos/neg swap rate applied to synthetic triples.
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run() -> Result<()> {
    let cli = Cli::parse();
    let mut config = match &cli.config {
        Some(path) => load_config(path).with_context(|| format!("loading {}", path.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed.0 = seed;
    }
    match cli.command {
        Command::Index(args) => cmd_index(&config, args),
        Command::Search(args) => cmd_search(&config, args),
        Command::Synthesize(args) => cmd_synthesize(&config, args),
        Command::Train(args) => cmd_train(&config, args),
        Command::Rerank(args) => cmd_rerank(&config, args),
        Command::Eval(args) => cmd_eval(&config, args),
        Command::NoiseBench(args) => cmd_noise_bench(&config, args),
    }
}

fn resolve(flag: Option<PathBuf>, from_config: &Option<String>, what: &str) -> Result<PathBuf> {
    if let Some(p) = flag {
        return Ok(p);
    }
    if let Some(p) = from_config {
        return Ok(PathBuf::from(p));
    }
    bail!("no {what} given: pass --{what} or set [paths].{what} in the config")
}

fn load_corpus_with_stopwords(config: &PipelineConfig, path: &Path) -> Result<Corpus> {
    let mut corpus = formats::load_corpus(path)?;
    if !config.stopwords.is_empty() {
        let stopwords: BTreeSet<String> = config.stopwords.iter().cloned().collect();
        corpus.strip_stopwords(&stopwords);
    }
    Ok(corpus)
}

fn load_queries_with_stopwords(config: &PipelineConfig, path: &Path) -> Result<QuerySet> {
    let mut queries = formats::load_queries(path)?;
    if !config.stopwords.is_empty() {
        let stopwords: BTreeSet<String> = config.stopwords.iter().cloned().collect();
        queries.strip_stopwords(&stopwords);
    }
    Ok(queries)
}

fn build_index(config: &PipelineConfig, corpus: &Corpus) -> Result<InvertedIndex> {
    Ok(InvertedIndex::build_with_params(
        corpus,
        Bm25Params::from(config.bm25),
    )?)
}

fn cmd_index(config: &PipelineConfig, args: IndexArgs) -> Result<()> {
    let corpus_path = resolve(args.corpus, &config.paths.corpus, "corpus")?;
    let corpus = load_corpus_with_stopwords(config, &corpus_path)?;
    let index = build_index(config, &corpus)?;

    let stats = serde_json::json!({
        "n_docs": index.n_docs(),
        "n_terms": index.n_terms(),
        "avg_doc_len": index.avg_doc_len(),
        "bm25": { "k1": index.params().k1, "b": index.params().b },
    });
    println!("documents: {}", index.n_docs());
    println!("terms: {}", index.n_terms());
    println!("avg doc length: {:.3}", index.avg_doc_len());
    if let Some(out) = args.out {
        write_text(&out, &(serde_json::to_string_pretty(&stats)? + "\n"))?;
    }
    Ok(())
}

fn cmd_search(config: &PipelineConfig, args: SearchArgs) -> Result<()> {
    let corpus_path = resolve(args.corpus, &config.paths.corpus, "corpus")?;
    let queries_path = resolve(args.queries, &config.paths.queries, "queries")?;
    let corpus = load_corpus_with_stopwords(config, &corpus_path)?;
    let queries = load_queries_with_stopwords(config, &queries_path)?;
    let index = build_index(config, &corpus)?;
    let k = args.k.unwrap_or(config.eval.depth);
    let run = index.search_all(&queries, k, &args.tag);
    formats::save_run(&run, &args.out)?;
    println!(
        "wrote {} ({} queries, depth {k})",
        args.out.display(),
        run.n_queries()
    );
    Ok(())
}

fn cmd_synthesize(config: &PipelineConfig, args: SynthesizeArgs) -> Result<()> {
    let corpus_path = resolve(args.corpus, &config.paths.corpus, "corpus")?;
    let corpus = load_corpus_with_stopwords(config, &corpus_path)?;
    let index = build_index(config, &corpus)?;
    let mut generator = config.generator.with_seed(config.seed.0);
    if let Some(v) = args.query_len {
        generator.query_len = v;
    }
    if let Some(v) = args.lambda {
        generator.contrast_penalty = v;
    }
    if let Some(v) = args.depth {
        generator.retrieval_depth = v;
    }
    if let Some(v) = args.pairs {
        generator.pairs_per_seed = v;
    }
    let triples = synthesize(&corpus, &index, &generator)?;
    formats::save_triples(&triples, &args.out)?;
    println!("wrote {} ({} triples)", args.out.display(), triples.len());
    Ok(())
}

fn cmd_train(config: &PipelineConfig, args: TrainArgs) -> Result<()> {
    let corpus_path = resolve(args.corpus, &config.paths.corpus, "corpus")?;
    let qrels_path = resolve(args.qrels, &config.paths.qrels, "qrels")?;
    let queries_path = resolve(args.queries, &config.paths.queries, "queries")?;
    let corpus = load_corpus_with_stopwords(config, &corpus_path)?;
    let queries = load_queries_with_stopwords(config, &queries_path)?;
    let qrels = formats::load_qrels(&qrels_path)?;
    let run = formats::load_run(&args.run)?;
    let triples = formats::load_triples(&args.triples)?;
    let index = build_index(config, &corpus)?;

    let mut train = config.train.train_config(config.seed.0)?;
    if let Some(steps) = args.steps {
        train.steps = steps;
    }
    let arch = config.train.arch()?;

    let synth_examples: Vec<mar::ranker::PairExample> = triples
        .iter()
        .map(|t| {
            mar::ranker::PairExample::from_docs(&t.query, &t.pos_doc_id, &t.neg_doc_id, &index)
        })
        .collect::<mar::Result<_>>()?;
    let target_triples = build_triples(&qrels, &run, config.eval.per_pos, config.seed.0);
    let target_examples: Vec<mar::ranker::PairExample> = target_triples
        .iter()
        .map(|t| {
            let query = queries
                .get(&t.query_id)
                .ok_or_else(|| mar::Error::UnknownQuery(t.query_id.clone()))?;
            mar::ranker::PairExample::from_docs(query, &t.pos_doc_id, &t.neg_doc_id, &index)
        })
        .collect::<mar::Result<_>>()?;

    let mode = if args.uniform {
        TrainMode::Uniform
    } else {
        TrainMode::Meta
    };
    let init = RankerParams::seeded_init(arch, config.seed.0);
    let outcome = run_training(&train, init, &synth_examples, &target_examples, mode)?;

    let checkpoint = formats::Checkpoint {
        params: outcome.state.params.clone(),
        step: outcome.state.step,
        optimizer: train.optimizer,
        adam_state: outcome.state.adam_state().cloned(),
    };
    formats::save_checkpoint(&checkpoint, &args.out_checkpoint)?;
    println!(
        "wrote {} after {} steps ({} synthetic, {} target triples)",
        args.out_checkpoint.display(),
        outcome.state.step,
        triples.len(),
        target_triples.len()
    );
    if let Some(out) = args.out_weights {
        formats::save_weight_log(&outcome.state.weight_log, &out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_rerank(config: &PipelineConfig, args: RerankArgs) -> Result<()> {
    let corpus_path = resolve(args.corpus, &config.paths.corpus, "corpus")?;
    let queries_path = resolve(args.queries, &config.paths.queries, "queries")?;
    let corpus = load_corpus_with_stopwords(config, &corpus_path)?;
    let queries = load_queries_with_stopwords(config, &queries_path)?;
    let index = build_index(config, &corpus)?;
    let checkpoint = formats::load_checkpoint(&args.checkpoint)?;
    let run = formats::load_run(&args.run)?;
    let depth = args.depth.unwrap_or(config.eval.depth);
    let reranked = rerank(&checkpoint.params, &index, &queries, &run, depth, &args.tag)?;
    formats::save_run(&reranked, &args.out)?;
    println!("wrote {} (depth {depth})", args.out.display());
    Ok(())
}

fn cmd_eval(config: &PipelineConfig, args: EvalArgs) -> Result<()> {
    let qrels_path = resolve(args.qrels, &config.paths.qrels, "qrels")?;
    let qrels = formats::load_qrels(&qrels_path)?;
    let run = formats::load_run(&args.run)?;
    let k = args.k.unwrap_or(config.eval.k);
    let metric_names = if args.metrics.is_empty() {
        config.eval.metrics.clone()
    } else {
        args.metrics.clone()
    };
    let metrics: Vec<(Metric, usize)> = metric_names
        .iter()
        .map(|name| Metric::parse(name).map(|m| (m, k)))
        .collect::<mar::Result<_>>()?;

    let mut reports: Vec<MetricReport> = Vec::new();
    let main_report = MetricReport::evaluate(&run, &qrels, &metrics)?;
    print!("{}", main_report.render_table());
    reports.push(main_report);

    let mut p_value = None;
    if let Some(other_path) = &args.compare {
        let other = formats::load_run(other_path)?;
        let other_report = MetricReport::evaluate(&other, &qrels, &metrics)?;
        print!("{}", other_report.render_table());
        reports.push(other_report);
        let (metric, k) = metrics
            .first()
            .copied()
            .ok_or_else(|| anyhow::anyhow!("no metric to compare on"))?;
        let n_perm = args.n_perm.unwrap_or(config.eval.n_perm);
        let p = permutation_test(&run, &other, &qrels, metric, k, n_perm, config.seed.0)?;
        println!(
            "permutation test on {} ({} samples): p = {p:.6}",
            metric.name(k),
            n_perm
        );
        p_value = Some(p);
    }

    if !args.rrf.is_empty() {
        let mut runs = vec![run.clone()];
        for path in &args.rrf {
            runs.push(formats::load_run(path)?);
        }
        let fused = rrf(&runs, args.rrf_k.unwrap_or(config.eval.rrf_k))?;
        let fused_report = MetricReport::evaluate(&fused, &qrels, &metrics)?;
        print!("{}", fused_report.render_table());
        reports.push(fused_report);
        if let Some(out) = &args.out_fused {
            formats::save_run(&fused, out)?;
            println!("wrote {}", out.display());
        }
    }

    if let Some(out) = args.out {
        let json = serde_json::json!({ "reports": reports, "p_value": p_value });
        write_text(&out, &(serde_json::to_string_pretty(&json)? + "\n"))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn cmd_noise_bench(config: &PipelineConfig, args: NoiseBenchArgs) -> Result<()> {
    let defaults = NoiseBenchConfig::default();
    let mut bench = NoiseBenchConfig {
        seed: config.seed.0,
        alpha: config.train.alpha,
        optimizer: config.train.optimizer()?,
        arch: config.train.arch()?,
        batch_synth: config.train.batch_synth,
        batch_target: config.train.batch_target,
        steps: config.train.steps,
        folds: config.eval.folds,
        depth: config.eval.depth,
        retrieval_k: config.eval.depth,
        per_pos: config.eval.per_pos,
        metric_k: config.eval.k,
        query_len: config.generator.query_len,
        contrast_penalty: config.generator.contrast_penalty,
        synth_depth: config.generator.retrieval_depth,
        pairs_per_seed: config.generator.pairs_per_seed,
        ..defaults
    };
    if let Some(v) = args.topics {
        bench.topics = v;
    }
    if let Some(v) = args.docs_per_topic {
        bench.docs_per_topic = v;
    }
    if let Some(v) = args.queries {
        bench.n_queries = v;
    }
    if let Some(v) = args.vocab {
        bench.vocab_size = v;
    }
    if let Some(v) = args.doc_len {
        bench.doc_len = v;
    }
    if let Some(v) = args.noise {
        bench.noise_rate = v;
    }
    if let Some(v) = args.steps {
        bench.steps = v;
    }
    if let Some(v) = args.trials {
        bench.trials = v;
    }
    let report = write_noise_bench(&bench, &args.out)?;
    print!("{}", report.render_table());
    println!("wrote {}", args.out.display());
    Ok(())
}

fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}
