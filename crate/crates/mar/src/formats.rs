//! External file formats.
//!
//! Every format has a string parser (the fuzzing surface) next to a file
//! loader and a writer. Writers emit exactly what the parsers accept, and
//! all of them are deterministic so repeated runs produce byte-identical
//! artifacts.
//!
//! | artifact     | format |
//! |--------------|--------|
//! | corpus       | JSONL `{"id", "title"?, "text"}` |
//! | queries      | TSV `qid<TAB>text` |
//! | qrels        | whitespace `qid 0 docid grade` |
//! | runs         | TREC `qid Q0 docid rank score tag` |
//! | triples      | JSONL `{"query", "pos", "neg", "seed_doc"}` |
//! | noise flags  | JSONL `{"triple_index", "flipped"}` |
//! | checkpoints  | JSON params + step + optimizer |
//! | weight log   | CSV `step,mean,std,min,max,frac_zero` |

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Qrels, Query, QuerySet};
use crate::error::{Error, Result};
use crate::eval::{RunEntry, RunFile};
use crate::metatrain::{AdamState, Optimizer, WeightSummary};
use crate::ranker::{Arch, RankerParams};
use crate::synthesis::{NoiseFlag, SyntheticTriple};

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(path.display().to_string(), e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

// ---------------------------------------------------------------------------
// Corpus JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct DocumentRecord {
    id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    text: String,
}

/// Parse a JSONL corpus; `source` names the input in error messages.
pub fn parse_corpus(input: &str, source: &str) -> Result<Corpus> {
    let mut corpus = Corpus::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DocumentRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        if record.id.is_empty() {
            return Err(Error::parse(source, lineno + 1, "document id is empty"));
        }
        corpus
            .push(Document::new(record.id, record.title, record.text))
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
    }
    Ok(corpus)
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    parse_corpus(&read(path)?, &path.display().to_string())
}

pub fn corpus_to_string(corpus: &Corpus) -> String {
    let mut out = String::new();
    for doc in corpus.docs() {
        let record = DocumentRecord {
            id: doc.id.clone(),
            title: doc.title.clone(),
            text: doc.text.clone(),
        };
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(&record).expect("serializable")
        );
    }
    out
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    write(path, &corpus_to_string(corpus))
}

// ---------------------------------------------------------------------------
// Queries TSV
// ---------------------------------------------------------------------------

pub fn parse_queries(input: &str, source: &str) -> Result<QuerySet> {
    let mut queries = QuerySet::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let Some((id, text)) = line.split_once('\t') else {
            return Err(Error::parse(source, lineno + 1, "expected `qid<TAB>text`"));
        };
        if id.is_empty() {
            return Err(Error::parse(source, lineno + 1, "query id is empty"));
        }
        queries
            .push(Query::new(id, text))
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
    }
    Ok(queries)
}

pub fn load_queries(path: &Path) -> Result<QuerySet> {
    parse_queries(&read(path)?, &path.display().to_string())
}

pub fn queries_to_string(queries: &QuerySet) -> String {
    let mut out = String::new();
    for q in queries.queries() {
        let _ = writeln!(out, "{}\t{}", q.id, q.text);
    }
    out
}

pub fn save_queries(queries: &QuerySet, path: &Path) -> Result<()> {
    write(path, &queries_to_string(queries))
}

// ---------------------------------------------------------------------------
// Qrels
// ---------------------------------------------------------------------------

pub fn parse_qrels(input: &str, source: &str) -> Result<Qrels> {
    let mut qrels = Qrels::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                source,
                lineno + 1,
                format!(
                    "expected 4 columns `qid 0 docid grade`, got {}",
                    fields.len()
                ),
            ));
        }
        let grade: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(source, lineno + 1, format!("bad grade `{}`", fields[3])))?;
        qrels.insert(fields[0], fields[2], grade);
    }
    Ok(qrels)
}

pub fn load_qrels(path: &Path) -> Result<Qrels> {
    parse_qrels(&read(path)?, &path.display().to_string())
}

pub fn qrels_to_string(qrels: &Qrels) -> String {
    let mut out = String::new();
    for (query_id, judged) in qrels.iter() {
        for (doc_id, grade) in judged {
            let _ = writeln!(out, "{query_id} 0 {doc_id} {grade}");
        }
    }
    out
}

pub fn save_qrels(qrels: &Qrels, path: &Path) -> Result<()> {
    write(path, &qrels_to_string(qrels))
}

// ---------------------------------------------------------------------------
// TREC run files
// ---------------------------------------------------------------------------

/// Parse a 6-column TREC run. Per query the rows are sorted by rank and
/// validated: consecutive ranks from 1, non-increasing scores, no duplicate
/// documents.
pub fn parse_run(input: &str, source: &str) -> Result<RunFile> {
    let mut tag: Option<String> = None;
    let mut rows: Vec<(String, RunEntry)> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                source,
                lineno + 1,
                format!(
                    "expected 6 columns `qid Q0 docid rank score tag`, got {}",
                    fields.len()
                ),
            ));
        }
        let rank: usize = fields[3]
            .parse()
            .map_err(|_| Error::parse(source, lineno + 1, format!("bad rank `{}`", fields[3])))?;
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(source, lineno + 1, format!("bad score `{}`", fields[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(source, lineno + 1, "score must be finite"));
        }
        tag.get_or_insert_with(|| fields[5].to_string());
        rows.push((
            fields[0].to_string(),
            RunEntry {
                doc_id: fields[2].to_string(),
                score,
                rank,
            },
        ));
    }

    let mut run = RunFile::new(tag.unwrap_or_else(|| "run".to_string()));
    let mut by_query: std::collections::BTreeMap<String, Vec<RunEntry>> =
        std::collections::BTreeMap::new();
    for (query_id, entry) in rows {
        by_query.entry(query_id).or_default().push(entry);
    }
    for (query_id, mut entries) in by_query {
        entries.sort_by_key(|e| e.rank);
        let mut seen = std::collections::BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.rank != i + 1 {
                return Err(Error::InvalidArgument(format!(
                    "{source}: query {query_id} has rank {} where {} was expected",
                    e.rank,
                    i + 1
                )));
            }
            if i > 0 && entries[i - 1].score < e.score {
                return Err(Error::InvalidArgument(format!(
                    "{source}: query {query_id} scores increase at rank {}",
                    e.rank
                )));
            }
            if !seen.insert(e.doc_id.clone()) {
                return Err(Error::InvalidArgument(format!(
                    "{source}: query {query_id} lists document {} twice",
                    e.doc_id
                )));
            }
        }
        for entry in entries {
            run.push(&query_id, entry);
        }
    }
    Ok(run)
}

pub fn load_run(path: &Path) -> Result<RunFile> {
    parse_run(&read(path)?, &path.display().to_string())
}

pub fn run_to_string(run: &RunFile) -> String {
    let mut out = String::new();
    for (query_id, entries) in run.iter() {
        for e in entries {
            let _ = writeln!(
                out,
                "{query_id} Q0 {} {} {:.6} {}",
                e.doc_id, e.rank, e.score, run.tag
            );
        }
    }
    out
}

pub fn save_run(run: &RunFile, path: &Path) -> Result<()> {
    write(path, &run_to_string(run))
}

// ---------------------------------------------------------------------------
// Synthetic triples JSONL
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TripleRecord {
    query: String,
    pos: String,
    neg: String,
    seed_doc: String,
}

/// Parse triples from JSONL; loaded triples get sequential ids and carry no
/// provenance.
pub fn parse_triples(input: &str, source: &str) -> Result<Vec<SyntheticTriple>> {
    let mut triples = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TripleRecord = serde_json::from_str(line)
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        if record.pos == record.neg {
            return Err(Error::parse(
                source,
                lineno + 1,
                "positive and negative documents must differ",
            ));
        }
        triples.push(SyntheticTriple {
            query: Query::new(format!("synth{:06}", triples.len()), record.query),
            pos_doc_id: record.pos,
            neg_doc_id: record.neg,
            seed_doc_id: record.seed_doc,
            provenance: None,
        });
    }
    Ok(triples)
}

pub fn load_triples(path: &Path) -> Result<Vec<SyntheticTriple>> {
    parse_triples(&read(path)?, &path.display().to_string())
}

pub fn triples_to_string(triples: &[SyntheticTriple]) -> String {
    let mut out = String::new();
    for t in triples {
        let record = TripleRecord {
            query: t.query.text.clone(),
            pos: t.pos_doc_id.clone(),
            neg: t.neg_doc_id.clone(),
            seed_doc: t.seed_doc_id.clone(),
        };
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string(&record).expect("serializable")
        );
    }
    out
}

pub fn save_triples(triples: &[SyntheticTriple], path: &Path) -> Result<()> {
    write(path, &triples_to_string(triples))
}

// ---------------------------------------------------------------------------
// Noise flags JSONL
// ---------------------------------------------------------------------------

pub fn parse_noise_flags(input: &str, source: &str) -> Result<Vec<NoiseFlag>> {
    let mut flags = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let flag: NoiseFlag = serde_json::from_str(line)
            .map_err(|e| Error::parse(source, lineno + 1, e.to_string()))?;
        flags.push(flag);
    }
    Ok(flags)
}

pub fn load_noise_flags(path: &Path) -> Result<Vec<NoiseFlag>> {
    parse_noise_flags(&read(path)?, &path.display().to_string())
}

pub fn noise_flags_to_string(flags: &[NoiseFlag]) -> String {
    let mut out = String::new();
    for f in flags {
        let _ = writeln!(out, "{}", serde_json::to_string(f).expect("serializable"));
    }
    out
}

pub fn save_noise_flags(flags: &[NoiseFlag], path: &Path) -> Result<()> {
    write(path, &noise_flags_to_string(flags))
}

// ---------------------------------------------------------------------------
// Ranker params and checkpoints
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct ParamsRecord {
    arch: String,
    h: usize,
    theta: Vec<f64>,
}

impl ParamsRecord {
    fn from_params(params: &RankerParams) -> Self {
        let (arch, h) = match params.arch() {
            Arch::Linear => ("linear".to_string(), 0),
            Arch::Mlp { hidden } => ("mlp".to_string(), hidden),
        };
        ParamsRecord {
            arch,
            h,
            theta: params.theta().to_vec(),
        }
    }

    fn into_params(self) -> Result<RankerParams> {
        let arch = match self.arch.as_str() {
            "linear" => Arch::Linear,
            "mlp" => {
                if self.h == 0 {
                    return Err(Error::InvalidArgument(
                        "mlp checkpoint needs a positive hidden width".into(),
                    ));
                }
                Arch::Mlp { hidden: self.h }
            }
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown architecture `{other}`"
                )))
            }
        };
        RankerParams::new(arch, self.theta)
    }
}

pub fn parse_params(input: &str) -> Result<RankerParams> {
    let record: ParamsRecord = serde_json::from_str(input)
        .map_err(|e| Error::InvalidArgument(format!("bad params json: {e}")))?;
    record.into_params()
}

pub fn params_to_string(params: &RankerParams) -> String {
    serde_json::to_string_pretty(&ParamsRecord::from_params(params)).expect("serializable")
}

/// A trainer checkpoint: the ranker parameters plus step counter and
/// optimizer configuration/state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: RankerParams,
    pub step: usize,
    pub optimizer: Optimizer,
    pub adam_state: Option<AdamState>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointRecord {
    #[serde(flatten)]
    params: ParamsRecord,
    step: usize,
    optimizer: OptimizerRecord,
}

#[derive(Serialize, Deserialize)]
struct OptimizerRecord {
    #[serde(flatten)]
    config: Optimizer,
    #[serde(skip_serializing_if = "Option::is_none")]
    state: Option<AdamState>,
}

pub fn parse_checkpoint(input: &str) -> Result<Checkpoint> {
    let record: CheckpointRecord = serde_json::from_str(input)
        .map_err(|e| Error::InvalidArgument(format!("bad checkpoint json: {e}")))?;
    let params = record.params.into_params()?;
    if let Some(state) = &record.optimizer.state {
        if state.m.len() != params.len() || state.v.len() != params.len() {
            return Err(Error::ShapeMismatch(
                "optimizer state length does not match parameters".into(),
            ));
        }
    }
    Ok(Checkpoint {
        params,
        step: record.step,
        optimizer: record.optimizer.config,
        adam_state: record.optimizer.state,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(&read(path)?)
}

pub fn checkpoint_to_string(checkpoint: &Checkpoint) -> String {
    let record = CheckpointRecord {
        params: ParamsRecord::from_params(&checkpoint.params),
        step: checkpoint.step,
        optimizer: OptimizerRecord {
            config: checkpoint.optimizer,
            state: checkpoint.adam_state.clone(),
        },
    };
    let mut out = serde_json::to_string_pretty(&record).expect("serializable");
    out.push('\n');
    out
}

pub fn save_checkpoint(checkpoint: &Checkpoint, path: &Path) -> Result<()> {
    write(path, &checkpoint_to_string(checkpoint))
}

// ---------------------------------------------------------------------------
// Weight log CSV
// ---------------------------------------------------------------------------

pub fn weight_log_to_string(log: &[WeightSummary]) -> String {
    let mut out = String::from("step,mean,std,min,max,frac_zero\n");
    for s in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.step, s.mean, s.std, s.min, s.max, s.frac_zero
        );
    }
    out
}

pub fn save_weight_log(log: &[WeightSummary], path: &Path) -> Result<()> {
    write(path, &weight_log_to_string(log))
}
