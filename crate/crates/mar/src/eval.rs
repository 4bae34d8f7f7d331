//! Ranking metrics, paired significance testing, reranking, reciprocal rank
//! fusion and the cross-validation harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{build_triples, make_folds, Corpus, Qrels, QuerySet, TrainingTriple};
use crate::error::{Error, Result};
use crate::metatrain::{run_training, TrainConfig, TrainMode, WeightSummary};
use crate::ranker::{extract_features, score, Arch, PairExample, RankerParams};
use crate::retrieval::InvertedIndex;
use crate::rng::{seeded, stream};
use crate::synthesis::SyntheticTriple;

/// One row of a ranked list.
#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub doc_id: String,
    pub score: f64,
    pub rank: usize,
}

/// A tagged multi-query run: per query, ranks are consecutive from 1 with
/// non-increasing scores and no duplicate documents.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFile {
    pub tag: String,
    queries: BTreeMap<String, Vec<RunEntry>>,
}

impl RunFile {
    pub fn new(tag: impl Into<String>) -> Self {
        RunFile {
            tag: tag.into(),
            queries: BTreeMap::new(),
        }
    }

    pub fn push(&mut self, query_id: &str, entry: RunEntry) {
        self.queries
            .entry(query_id.to_string())
            .or_default()
            .push(entry);
    }

    pub fn entries(&self, query_id: &str) -> Option<&[RunEntry]> {
        self.queries.get(query_id).map(Vec::as_slice)
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.queries.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[RunEntry])> {
        self.queries.iter().map(|(q, e)| (q.as_str(), e.as_slice()))
    }

    pub fn n_queries(&self) -> usize {
        self.queries.len()
    }

    /// Keep only the listed queries.
    pub fn restricted_to(&self, ids: &BTreeSet<String>) -> RunFile {
        RunFile {
            tag: self.tag.clone(),
            queries: self
                .queries
                .iter()
                .filter(|(q, _)| ids.contains(*q))
                .map(|(q, e)| (q.clone(), e.clone()))
                .collect(),
        }
    }

    /// Absorb another run's queries (used to pool per-fold reranks).
    pub fn merge(&mut self, other: RunFile) {
        self.queries.extend(other.queries);
    }
}

fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

fn dcg(grades: impl Iterator<Item = u32>) -> f64 {
    grades
        .enumerate()
        .map(|(i, g)| gain(g) / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG@k per query. The ideal DCG ranks every judged document of the
/// query, so relevant documents missing from the run still cost recall;
/// queries without relevant documents score 0.
pub fn ndcg_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> BTreeMap<String, f64> {
    run.iter()
        .map(|(query_id, entries)| {
            let actual = dcg(entries
                .iter()
                .take(k)
                .map(|e| qrels.grade(query_id, &e.doc_id)));
            let mut ideal: Vec<u32> = qrels
                .judged(query_id)
                .map(|(_, g)| g)
                .filter(|&g| g > 0)
                .collect();
            ideal.sort_unstable_by(|a, b| b.cmp(a));
            let ideal = dcg(ideal.into_iter().take(k));
            let value = if ideal > 0.0 { actual / ideal } else { 0.0 };
            (query_id.to_string(), value)
        })
        .collect()
}

/// ERR@k per query with stopping probability (2^g - 1) / 2^g_max.
pub fn err_at_k(
    run: &RunFile,
    qrels: &Qrels,
    k: usize,
    g_max: u32,
) -> Result<BTreeMap<String, f64>> {
    if g_max < 1 {
        return Err(Error::InvalidArgument(
            "err_at_k requires a maximum grade of at least 1".into(),
        ));
    }
    let denom = 2f64.powi(g_max as i32);
    Ok(run
        .iter()
        .map(|(query_id, entries)| {
            let mut err = 0.0;
            let mut not_stopped = 1.0;
            for (i, entry) in entries.iter().take(k).enumerate() {
                let r = gain(qrels.grade(query_id, &entry.doc_id)) / denom;
                err += not_stopped * r / (i + 1) as f64;
                not_stopped *= 1.0 - r;
            }
            (query_id.to_string(), err)
        })
        .collect())
}

/// P@k per query; short result lists are treated as padded with
/// non-relevant documents (the divisor is always k).
pub fn precision_at_k(run: &RunFile, qrels: &Qrels, k: usize) -> BTreeMap<String, f64> {
    run.iter()
        .map(|(query_id, entries)| {
            let hits = entries
                .iter()
                .take(k)
                .filter(|e| qrels.grade(query_id, &e.doc_id) > 0)
                .count();
            (query_id.to_string(), hits as f64 / k as f64)
        })
        .collect()
}

/// Which metric a report or significance test evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Ndcg,
    Err,
    Precision,
}

impl Metric {
    pub fn name(self, k: usize) -> String {
        match self {
            Metric::Ndcg => format!("ndcg@{k}"),
            Metric::Err => format!("err@{k}"),
            Metric::Precision => format!("p@{k}"),
        }
    }

    pub fn parse(s: &str) -> Result<Metric> {
        match s.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(Metric::Ndcg),
            "err" => Ok(Metric::Err),
            "p" | "precision" => Ok(Metric::Precision),
            other => Err(Error::InvalidArgument(format!("unknown metric `{other}`"))),
        }
    }

    pub fn compute(self, run: &RunFile, qrels: &Qrels, k: usize) -> Result<BTreeMap<String, f64>> {
        match self {
            Metric::Ndcg => Ok(ndcg_at_k(run, qrels, k)),
            Metric::Err => err_at_k(run, qrels, k, qrels.g_max().max(1)),
            Metric::Precision => Ok(precision_at_k(run, qrels, k)),
        }
    }
}

/// Paired randomization (sign-flip) test on per-query metric differences.
/// Returns the smoothed two-sided p-value (count + 1) / (n_perm + 1).
pub fn permutation_test(
    run_a: &RunFile,
    run_b: &RunFile,
    qrels: &Qrels,
    metric: Metric,
    k: usize,
    n_perm: usize,
    seed: u64,
) -> Result<f64> {
    let common: Vec<String> = run_a
        .query_ids()
        .filter(|q| run_b.entries(q).is_some())
        .map(str::to_string)
        .collect();
    if common.is_empty() {
        return Err(Error::DisjointRuns);
    }
    if n_perm == 0 {
        return Err(Error::InvalidArgument("n_perm must be at least 1".into()));
    }
    let per_a = metric.compute(run_a, qrels, k)?;
    let per_b = metric.compute(run_b, qrels, k)?;
    let diffs: Vec<f64> = common.iter().map(|q| per_a[q] - per_b[q]).collect();
    let n = diffs.len() as f64;
    let observed = (diffs.iter().sum::<f64>() / n).abs();

    let mut rng = seeded(seed, stream::PERMUTATION);
    let mut at_least_as_extreme = 0usize;
    for _ in 0..n_perm {
        let permuted: f64 = diffs
            .iter()
            .map(|&d| if rng.random_bool(0.5) { -d } else { d })
            .sum::<f64>()
            / n;
        if permuted.abs() >= observed {
            at_least_as_extreme += 1;
        }
    }
    Ok((at_least_as_extreme + 1) as f64 / (n_perm + 1) as f64)
}

/// Rescore the top `depth` candidates of every query with the ranker and
/// reorder them; candidates beyond the window keep their original order
/// below it. Scores and ranks are rebuilt so the run invariants hold: tail
/// documents get synthetic scores strictly under the rescored window.
pub fn rerank(
    params: &RankerParams,
    index: &InvertedIndex,
    queries: &QuerySet,
    first_stage: &RunFile,
    depth: usize,
    tag: &str,
) -> Result<RunFile> {
    if depth == 0 {
        return Err(Error::InvalidArgument(
            "rerank depth must be at least 1".into(),
        ));
    }
    let mut out = RunFile::new(tag);
    for (query_id, entries) in first_stage.iter() {
        let query = queries
            .get(query_id)
            .ok_or_else(|| Error::UnknownQuery(query_id.to_string()))?;
        let window = depth.min(entries.len());
        let mut rescored: Vec<(String, f64)> = entries[..window]
            .iter()
            .map(|e| {
                extract_features(query, &e.doc_id, index)
                    .map(|x| (e.doc_id.clone(), score(params, &x)))
            })
            .collect::<Result<_>>()?;
        rescored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        let floor = rescored.last().map_or(0.0, |(_, s)| *s);
        for (rank, (doc_id, s)) in rescored.into_iter().enumerate() {
            out.push(
                query_id,
                RunEntry {
                    doc_id,
                    score: s,
                    rank: rank + 1,
                },
            );
        }
        for (i, e) in entries[window..].iter().enumerate() {
            out.push(
                query_id,
                RunEntry {
                    doc_id: e.doc_id.clone(),
                    score: floor - (i + 1) as f64,
                    rank: window + i + 1,
                },
            );
        }
    }
    Ok(out)
}

/// Reciprocal rank fusion: score(d) = sum over runs containing d of
/// 1 / (k_rrf + rank(d)); ties break by ascending doc id.
pub fn rrf(runs: &[RunFile], k_rrf: f64) -> Result<RunFile> {
    if runs.len() < 2 {
        return Err(Error::InvalidArgument(
            "reciprocal rank fusion needs at least two runs".into(),
        ));
    }
    let mut fused = RunFile::new("rrf");
    let all_queries: BTreeSet<&str> = runs.iter().flat_map(|r| r.query_ids()).collect();
    for query_id in all_queries {
        let mut scores: BTreeMap<&str, f64> = BTreeMap::new();
        for run in runs {
            if let Some(entries) = run.entries(query_id) {
                for e in entries {
                    *scores.entry(e.doc_id.as_str()).or_insert(0.0) +=
                        1.0 / (k_rrf + e.rank as f64);
                }
            }
        }
        let mut ranked: Vec<(&str, f64)> = scores.into_iter().collect();
        ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(b.0)));
        for (rank, (doc_id, s)) in ranked.into_iter().enumerate() {
            fused.push(
                query_id,
                RunEntry {
                    doc_id: doc_id.to_string(),
                    score: s,
                    rank: rank + 1,
                },
            );
        }
    }
    Ok(fused)
}

/// Mean and per-query values for one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub name: String,
    pub mean: f64,
    pub per_query: BTreeMap<String, f64>,
}

impl MetricResult {
    pub fn from_per_query(name: String, per_query: BTreeMap<String, f64>) -> Self {
        let mean = if per_query.is_empty() {
            0.0
        } else {
            per_query.values().sum::<f64>() / per_query.len() as f64
        };
        MetricResult {
            name,
            mean,
            per_query,
        }
    }
}

/// Metric results over one evaluated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct MetricReport {
    pub run_tag: String,
    pub metrics: Vec<MetricResult>,
}

impl MetricReport {
    pub fn evaluate(
        run: &RunFile,
        qrels: &Qrels,
        metrics: &[(Metric, usize)],
    ) -> Result<MetricReport> {
        let mut report = MetricReport {
            run_tag: run.tag.clone(),
            metrics: Vec::new(),
        };
        for &(metric, k) in metrics {
            let per_query = metric.compute(run, qrels, k)?;
            report
                .metrics
                .push(MetricResult::from_per_query(metric.name(k), per_query));
        }
        Ok(report)
    }

    pub fn mean_of(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|m| m.name == name).map(|m| m.mean)
    }

    /// Plain-text table: one row per metric, means only.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "run: {}", self.run_tag);
        for m in &self.metrics {
            let _ = writeln!(
                out,
                "  {:<10} {:.5}  ({} queries)",
                m.name,
                m.mean,
                m.per_query.len()
            );
        }
        out
    }
}

/// Per-example training data for one fold: target pairs come from the
/// fold's training queries only.
fn pair_examples_for_triples(
    triples: &[TrainingTriple],
    queries: &QuerySet,
    index: &InvertedIndex,
) -> Result<Vec<PairExample>> {
    triples
        .iter()
        .map(|t| {
            let query = queries
                .get(&t.query_id)
                .ok_or_else(|| Error::UnknownQuery(t.query_id.clone()))?;
            PairExample::from_docs(query, &t.pos_doc_id, &t.neg_doc_id, index)
        })
        .collect()
}

fn pair_examples_for_synthetic(
    triples: &[SyntheticTriple],
    index: &InvertedIndex,
) -> Result<Vec<PairExample>> {
    triples
        .iter()
        .map(|t| PairExample::from_docs(&t.query, &t.pos_doc_id, &t.neg_doc_id, index))
        .collect()
}

/// Cross-validation settings. `seed` drives fold assignment, parameter
/// init and target-triple sampling; the train config's own seed drives
/// batch sequencing.
#[derive(Debug, Clone)]
pub struct CvConfig {
    pub folds: usize,
    pub depth: usize,
    pub per_pos: usize,
    pub metrics: Vec<(Metric, usize)>,
    pub arch: Arch,
    pub train: TrainConfig,
    pub mode: TrainMode,
    pub seed: u64,
}

/// Pooled and per-fold evaluation of one cross-validated training run.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    /// Metrics over all queries, each evaluated by the fold that held it out.
    pub report: MetricReport,
    pub fold_reports: Vec<MetricReport>,
    pub reranked: RunFile,
    /// Weight-log summaries per fold (meta mode only).
    pub weight_logs: Vec<Vec<WeightSummary>>,
    /// Final per-synthetic-example weights per fold (meta mode only).
    pub final_weights: Vec<Vec<Option<f64>>>,
}

/// Train per fold on synthetic data (meta-reweighted against the training
/// folds' judged triples, or uniform) and rerank each fold's held-out
/// queries.
pub fn cross_validate(
    corpus: &Corpus,
    queries: &QuerySet,
    qrels: &Qrels,
    first_stage: &RunFile,
    synth: &[SyntheticTriple],
    config: &CvConfig,
) -> Result<CvOutcome> {
    let index = InvertedIndex::build(corpus)?;
    let synth_examples = pair_examples_for_synthetic(synth, &index)?;

    // Queries must be judged, retrievable and known to participate.
    let fold_queries: Vec<String> = qrels
        .query_ids()
        .filter(|q| first_stage.entries(q).is_some() && queries.get(q).is_some())
        .map(str::to_string)
        .collect();
    let folds = make_folds(&fold_queries, config.folds, config.seed)?;

    let all_triples = build_triples(qrels, first_stage, config.per_pos, config.seed);

    let tag = match config.mode {
        TrainMode::Meta => format!("{}-meta", first_stage.tag),
        TrainMode::Uniform => format!("{}-uniform", first_stage.tag),
    };
    let mut pooled = RunFile::new(&tag);
    let mut fold_reports = Vec::with_capacity(config.folds);
    let mut weight_logs = Vec::new();
    let mut final_weights = Vec::new();

    for fold in 0..config.folds {
        let train_triples: Vec<TrainingTriple> = all_triples
            .iter()
            .filter(|t| folds.fold_of(&t.query_id) != Some(fold))
            .cloned()
            .collect();
        let target_examples = pair_examples_for_triples(&train_triples, queries, &index)?;

        let init =
            RankerParams::seeded_init(config.arch, crate::rng::derive(config.seed, fold as u64));
        let outcome = run_training(
            &config.train,
            init,
            &synth_examples,
            &target_examples,
            config.mode,
        )?;

        let held_out: BTreeSet<String> = folds
            .queries_in(fold)
            .into_iter()
            .map(str::to_string)
            .collect();
        let fold_run = rerank(
            &outcome.state.params,
            &index,
            queries,
            &first_stage.restricted_to(&held_out),
            config.depth,
            &tag,
        )?;
        fold_reports.push(MetricReport::evaluate(&fold_run, qrels, &config.metrics)?);
        pooled.merge(fold_run);

        if config.mode == TrainMode::Meta {
            weight_logs.push(outcome.state.weight_log.clone());
            final_weights.push(outcome.final_weights.clone());
        }
    }

    let report = MetricReport::evaluate(&pooled, qrels, &config.metrics)?;
    Ok(CvOutcome {
        report,
        fold_reports,
        reranked: pooled,
        weight_logs,
        final_weights,
    })
}
