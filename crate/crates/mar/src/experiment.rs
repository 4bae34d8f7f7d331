//! The noise-robustness benchmark: generate a synthetic collection,
//! synthesize weak supervision, flip a fraction of it, then train the
//! meta-reweighted and uniform rankers and compare them.
//!
//! Everything is a pure function of the benchmark seed, so repeated runs
//! emit byte-identical artifacts.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{generate_synthetic_collection, SyntheticSpec};
use crate::error::Result;
use crate::eval::{cross_validate, CvConfig, Metric};
use crate::formats;
use crate::metatrain::{Optimizer, TrainConfig, TrainMode};
use crate::ranker::Arch;
use crate::retrieval::InvertedIndex;
use crate::rng::derive;
use crate::synthesis::{inject_noise, synthesize, GeneratorConfig};

/// Benchmark shape and training settings. The defaults are the standing
/// configuration the test suite pins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBenchConfig {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub n_queries: usize,
    pub vocab_size: usize,
    pub doc_len: usize,
    /// Fraction of synthetic triples whose pos/neg roles get swapped.
    pub noise_rate: f64,
    pub steps: usize,
    pub batch_synth: usize,
    pub batch_target: usize,
    pub alpha: f64,
    pub optimizer: Optimizer,
    pub arch: Arch,
    pub folds: usize,
    /// Rerank window.
    pub depth: usize,
    /// First-stage retrieval depth.
    pub retrieval_k: usize,
    pub per_pos: usize,
    /// Metric cutoff (NDCG@k).
    pub metric_k: usize,
    /// Synthesis knobs.
    pub query_len: usize,
    pub contrast_penalty: f64,
    pub synth_depth: usize,
    pub pairs_per_seed: usize,
    /// Independent repetitions averaged in the comparison.
    pub trials: usize,
    pub seed: u64,
}

impl Default for NoiseBenchConfig {
    fn default() -> Self {
        NoiseBenchConfig {
            topics: 4,
            docs_per_topic: 50,
            n_queries: 40,
            vocab_size: 40,
            doc_len: 30,
            noise_rate: 0.3,
            steps: 500,
            batch_synth: 8,
            batch_target: 8,
            alpha: 0.1,
            // Tuned so that 500 steps land mid-convergence: the scorer's
            // ranking direction separates meta from uniform training while
            // meta-weights stay informative through the final epoch.
            optimizer: Optimizer::Sgd { lr: 1.5e-4 },
            arch: Arch::Mlp { hidden: 8 },
            folds: 5,
            depth: 100,
            retrieval_k: 100,
            per_pos: 1,
            metric_k: 20,
            query_len: 4,
            contrast_penalty: 1.0,
            synth_depth: 100,
            pairs_per_seed: 1,
            trials: 5,
            seed: 42,
        }
    }
}

/// Comparison results of one trial (one generated collection).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub n_triples: usize,
    pub n_flipped: usize,
    pub ndcg_bm25: f64,
    pub ndcg_meta: f64,
    pub ndcg_uniform: f64,
    pub ndcg_gap: f64,
    pub mean_weight_clean: f64,
    pub mean_weight_flipped: f64,
    pub median_weight_flipped: f64,
    /// Fraction of logged batches whose weights vary within the batch.
    pub frac_batches_diverse: f64,
}

/// Aggregate benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBenchReport {
    pub config: NoiseBenchConfig,
    pub trials: Vec<TrialReport>,
    pub mean_ndcg_meta: f64,
    pub mean_ndcg_uniform: f64,
    pub mean_ndcg_gap: f64,
    /// Weight statistics pooled over every fold of every trial.
    pub mean_weight_clean: f64,
    pub mean_weight_flipped: f64,
    pub median_weight_flipped: f64,
    pub frac_batches_diverse: f64,
}

impl NoiseBenchReport {
    /// Human-readable summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "noise benchmark: {} topics x {} docs, {} queries, noise {:.2}, {} steps, {} trials",
            self.config.topics,
            self.config.docs_per_topic,
            self.config.n_queries,
            self.config.noise_rate,
            self.config.steps,
            self.config.trials,
        );
        let _ = writeln!(
            out,
            "{:>5} {:>12} {:>12} {:>12} {:>8} {:>12} {:>14} {:>10}",
            "trial",
            "ndcg(bm25)",
            "ndcg(meta)",
            "ndcg(unif)",
            "gap",
            "w(clean)",
            "w(flipped)",
            "diverse"
        );
        for t in &self.trials {
            let _ = writeln!(
                out,
                "{:>5} {:>12.5} {:>12.5} {:>12.5} {:>8.5} {:>12.6} {:>14.6} {:>10.3}",
                t.trial,
                t.ndcg_bm25,
                t.ndcg_meta,
                t.ndcg_uniform,
                t.ndcg_gap,
                t.mean_weight_clean,
                t.mean_weight_flipped,
                t.frac_batches_diverse,
            );
        }
        let _ = writeln!(
            out,
            "{:>5} {:>12} {:>12.5} {:>12.5} {:>8.5} {:>12.6} {:>14.6} {:>10.3}",
            "mean",
            "",
            self.mean_ndcg_meta,
            self.mean_ndcg_uniform,
            self.mean_ndcg_gap,
            self.mean_weight_clean,
            self.mean_weight_flipped,
            self.frac_batches_diverse,
        );
        let _ = writeln!(
            out,
            "median final weight on flipped triples: {}",
            self.median_weight_flipped
        );
        out
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

struct TrialData {
    report: TrialReport,
    clean_weights: Vec<f64>,
    flipped_weights: Vec<f64>,
    diverse_batches: usize,
    total_batches: usize,
    artifacts: TrialArtifacts,
}

struct TrialArtifacts {
    collection: crate::corpus::SyntheticCollection,
    first_stage: crate::eval::RunFile,
    triples: Vec<crate::synthesis::SyntheticTriple>,
    flags: Vec<crate::synthesis::NoiseFlag>,
    weight_logs: Vec<Vec<crate::metatrain::WeightSummary>>,
    final_weights: Vec<Vec<Option<f64>>>,
}

fn run_trial(config: &NoiseBenchConfig, trial: usize) -> Result<TrialData> {
    let trial_seed = derive(config.seed, trial as u64);
    let spec = SyntheticSpec {
        n_topics: config.topics,
        docs_per_topic: config.docs_per_topic,
        n_queries: config.n_queries,
        vocab_size: config.vocab_size,
        doc_len: config.doc_len,
        noise_rate: config.noise_rate,
        seed: trial_seed,
    };
    let collection = generate_synthetic_collection(&spec)?;
    let index = InvertedIndex::build(&collection.corpus)?;
    let first_stage = index.search_all(&collection.queries, config.retrieval_k, "bm25");

    let generator = GeneratorConfig {
        query_len: config.query_len,
        contrast_penalty: config.contrast_penalty,
        retrieval_depth: config.synth_depth,
        pairs_per_seed: config.pairs_per_seed,
        seed: trial_seed,
    };
    let clean_triples = synthesize(&collection.corpus, &index, &generator)?;
    let (triples, flags) =
        inject_noise(&clean_triples, collection.noise_rate, collection.noise_seed)?;

    let train = TrainConfig {
        alpha: config.alpha,
        eta: 1.0,
        batch_synth: config.batch_synth,
        batch_target: config.batch_target,
        steps: config.steps,
        optimizer: config.optimizer,
        seed: trial_seed,
    };
    let cv = |mode: TrainMode| CvConfig {
        folds: config.folds,
        depth: config.depth,
        per_pos: config.per_pos,
        metrics: vec![(Metric::Ndcg, config.metric_k)],
        arch: config.arch,
        train,
        mode,
        seed: trial_seed,
    };

    let meta = cross_validate(
        &collection.corpus,
        &collection.queries,
        &collection.qrels,
        &first_stage,
        &triples,
        &cv(TrainMode::Meta),
    )?;
    let uniform = cross_validate(
        &collection.corpus,
        &collection.queries,
        &collection.qrels,
        &first_stage,
        &triples,
        &cv(TrainMode::Uniform),
    )?;

    let metric_name = Metric::Ndcg.name(config.metric_k);
    let ndcg_meta = meta.report.mean_of(&metric_name).unwrap_or(0.0);
    let ndcg_uniform = uniform.report.mean_of(&metric_name).unwrap_or(0.0);
    let bm25_report = crate::eval::MetricReport::evaluate(
        &first_stage,
        &collection.qrels,
        &[(Metric::Ndcg, config.metric_k)],
    )?;
    let ndcg_bm25 = bm25_report.mean_of(&metric_name).unwrap_or(0.0);

    // Final per-triple weights from every meta fold, split by the noise plan.
    let mut clean_weights = Vec::new();
    let mut flipped_weights = Vec::new();
    for fold_weights in &meta.final_weights {
        for (i, w) in fold_weights.iter().enumerate() {
            let Some(w) = w else { continue };
            if flags[i].flipped {
                flipped_weights.push(*w);
            } else {
                clean_weights.push(*w);
            }
        }
    }

    let mut diverse = 0usize;
    let mut total = 0usize;
    for log in &meta.weight_logs {
        for summary in log {
            total += 1;
            if summary.std > 0.0 {
                diverse += 1;
            }
        }
    }

    let mut flipped_for_median = flipped_weights.clone();
    let report = TrialReport {
        trial,
        seed: trial_seed,
        n_triples: triples.len(),
        n_flipped: flags.iter().filter(|f| f.flipped).count(),
        ndcg_bm25,
        ndcg_meta,
        ndcg_uniform,
        ndcg_gap: ndcg_meta - ndcg_uniform,
        mean_weight_clean: mean(&clean_weights),
        mean_weight_flipped: mean(&flipped_weights),
        median_weight_flipped: median(&mut flipped_for_median),
        frac_batches_diverse: if total == 0 {
            0.0
        } else {
            diverse as f64 / total as f64
        },
    };

    Ok(TrialData {
        report,
        clean_weights,
        flipped_weights,
        diverse_batches: diverse,
        total_batches: total,
        artifacts: TrialArtifacts {
            collection,
            first_stage,
            triples,
            flags,
            weight_logs: meta.weight_logs,
            final_weights: meta.final_weights,
        },
    })
}

fn assemble(
    config: &NoiseBenchConfig,
    trials: Vec<TrialData>,
) -> (NoiseBenchReport, Vec<TrialArtifacts>) {
    let mut clean = Vec::new();
    let mut flipped = Vec::new();
    let mut diverse = 0usize;
    let mut total = 0usize;
    let mut reports = Vec::with_capacity(trials.len());
    let mut artifacts = Vec::with_capacity(trials.len());
    for t in trials {
        clean.extend(t.clean_weights);
        flipped.extend(t.flipped_weights);
        diverse += t.diverse_batches;
        total += t.total_batches;
        reports.push(t.report);
        artifacts.push(t.artifacts);
    }
    let mut flipped_for_median = flipped.clone();
    let report = NoiseBenchReport {
        config: config.clone(),
        mean_ndcg_meta: mean(&reports.iter().map(|t| t.ndcg_meta).collect::<Vec<_>>()),
        mean_ndcg_uniform: mean(&reports.iter().map(|t| t.ndcg_uniform).collect::<Vec<_>>()),
        mean_ndcg_gap: mean(&reports.iter().map(|t| t.ndcg_gap).collect::<Vec<_>>()),
        mean_weight_clean: mean(&clean),
        mean_weight_flipped: mean(&flipped),
        median_weight_flipped: median(&mut flipped_for_median),
        frac_batches_diverse: if total == 0 {
            0.0
        } else {
            diverse as f64 / total as f64
        },
        trials: reports,
    };
    (report, artifacts)
}

/// Run the benchmark in memory.
pub fn run_noise_bench(config: &NoiseBenchConfig) -> Result<NoiseBenchReport> {
    let trials: Vec<TrialData> = (0..config.trials)
        .map(|t| run_trial(config, t))
        .collect::<Result<_>>()?;
    Ok(assemble(config, trials).0)
}

/// Run the benchmark and write every artifact under `out_dir`: per trial
/// the collection files, first-stage run, (noisy) triples with their noise
/// flags, per-fold weight logs and final weights, plus `report.json` and
/// `report.txt` at the top.
pub fn write_noise_bench(config: &NoiseBenchConfig, out_dir: &Path) -> Result<NoiseBenchReport> {
    let trials: Vec<TrialData> = (0..config.trials)
        .map(|t| run_trial(config, t))
        .collect::<Result<_>>()?;
    let (report, artifacts) = assemble(config, trials);

    for (t, art) in artifacts.iter().enumerate() {
        let dir = out_dir.join(format!("trial{t}"));
        formats::save_corpus(&art.collection.corpus, &dir.join("corpus.jsonl"))?;
        formats::save_queries(&art.collection.queries, &dir.join("queries.tsv"))?;
        formats::save_qrels(&art.collection.qrels, &dir.join("qrels.txt"))?;
        formats::save_run(&art.first_stage, &dir.join("bm25.run"))?;
        formats::save_triples(&art.triples, &dir.join("triples.jsonl"))?;
        formats::save_noise_flags(&art.flags, &dir.join("noise_flags.jsonl"))?;
        for (fold, log) in art.weight_logs.iter().enumerate() {
            formats::save_weight_log(log, &dir.join(format!("weights_fold{fold}.csv")))?;
        }
        let mut final_csv = String::from("fold,triple_index,flipped,weight\n");
        for (fold, weights) in art.final_weights.iter().enumerate() {
            for (i, w) in weights.iter().enumerate() {
                let Some(w) = w else { continue };
                let _ = writeln!(final_csv, "{fold},{i},{},{w}", art.flags[i].flipped);
            }
        }
        std::fs::create_dir_all(&dir)
            .map_err(|e| crate::Error::io(dir.display().to_string(), e))?;
        std::fs::write(dir.join("final_weights.csv"), final_csv)
            .map_err(|e| crate::Error::io(dir.display().to_string(), e))?;
    }

    let json = serde_json::to_string_pretty(&report).expect("serializable");
    std::fs::create_dir_all(out_dir)
        .map_err(|e| crate::Error::io(out_dir.display().to_string(), e))?;
    std::fs::write(out_dir.join("report.json"), json + "\n")
        .map_err(|e| crate::Error::io(out_dir.display().to_string(), e))?;
    std::fs::write(out_dir.join("report.txt"), report.render_table())
        .map_err(|e| crate::Error::io(out_dir.display().to_string(), e))?;
    Ok(report)
}
