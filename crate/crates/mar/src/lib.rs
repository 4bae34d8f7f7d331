//! Desk-scale learning to rank with synthesized weak supervision.
//!
//! The pipeline: ingest (or generate) a document collection, synthesize
//! contrastive weak relevance triples for it, then train a small feature
//! ranker whose per-example weights are meta-learned against a handful of
//! trusted judgments — so noisy synthetic data gets filtered instead of
//! poisoning the model. Evaluation covers BM25 first-stage retrieval,
//! reranking, NDCG/ERR/P@k, paired permutation testing and reciprocal rank
//! fusion.
//!
//! Modules follow the pipeline:
//!
//! - [`corpus`]: documents, queries, qrels, folds, triples, synthetic
//!   collections
//! - [`retrieval`]: inverted index and BM25 search
//! - [`synthesis`]: seed queries, confusable pair mining, contrastive
//!   queries, noise injection
//! - [`ranker`]: match features, tanh scoring head, hinge loss, exact
//!   gradients and their finite-difference oracle
//! - [`metatrain`]: meta-forward/meta-backward reweighting, weight
//!   normalization, the trainers
//! - [`eval`]: metrics, permutation test, rerank, RRF, cross-validation
//! - [`experiment`]: the end-to-end noise-robustness benchmark
//! - [`formats`]: every on-disk format (JSONL, TSV, qrels, TREC runs,
//!   checkpoints)

pub mod config;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod formats;
pub mod metatrain;
pub mod par;
pub mod ranker;
pub mod retrieval;
pub mod synthesis;

mod rng;

pub use error::{Error, Result};
