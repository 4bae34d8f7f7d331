//! Pipeline configuration: a TOML file with per-section defaults that
//! command-line flags override. One `seed` governs every seeded component.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Metric;
use crate::metatrain::{Optimizer, TrainConfig};
use crate::ranker::Arch;
use crate::retrieval::Bm25Params;
use crate::synthesis::GeneratorConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Seed,
    pub paths: PathsSection,
    pub bm25: Bm25Section,
    pub generator: GeneratorSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    /// Optional stopword list applied to documents and queries after load.
    pub stopwords: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Default for Seed {
    fn default() -> Self {
        Seed(42)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub corpus: Option<String>,
    pub qrels: Option<String>,
    pub queries: Option<String>,
    pub out: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Bm25Section {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Section {
    fn default() -> Self {
        let p = Bm25Params::default();
        Bm25Section { k1: p.k1, b: p.b }
    }
}

impl From<Bm25Section> for Bm25Params {
    fn from(s: Bm25Section) -> Self {
        Bm25Params { k1: s.k1, b: s.b }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorSection {
    pub query_len: usize,
    pub contrast_penalty: f64,
    pub retrieval_depth: usize,
    pub pairs_per_seed: usize,
}

impl Default for GeneratorSection {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        GeneratorSection {
            query_len: g.query_len,
            contrast_penalty: g.contrast_penalty,
            retrieval_depth: g.retrieval_depth,
            pairs_per_seed: g.pairs_per_seed,
        }
    }
}

impl GeneratorSection {
    pub fn with_seed(&self, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            query_len: self.query_len,
            contrast_penalty: self.contrast_penalty,
            retrieval_depth: self.retrieval_depth,
            pairs_per_seed: self.pairs_per_seed,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub alpha: f64,
    pub eta: f64,
    pub batch_synth: usize,
    pub batch_target: usize,
    pub steps: usize,
    /// `"sgd"` or `"adam"`.
    pub optimizer: String,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_adam: f64,
    /// `"linear"` or `"mlp"`.
    pub arch: String,
    pub hidden: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection {
            alpha: 0.1,
            eta: 1.0,
            batch_synth: 8,
            batch_target: 8,
            steps: 500,
            optimizer: "sgd".into(),
            lr: 1.5e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps_adam: 1e-8,
            arch: "mlp".into(),
            hidden: 8,
        }
    }
}

impl TrainSection {
    pub fn optimizer(&self) -> Result<Optimizer> {
        match self.optimizer.as_str() {
            "sgd" => Ok(Optimizer::Sgd { lr: self.lr }),
            "adam" => Ok(Optimizer::Adam {
                lr: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps_adam,
            }),
            other => Err(Error::InvalidArgument(format!(
                "unknown optimizer `{other}`"
            ))),
        }
    }

    pub fn arch(&self) -> Result<Arch> {
        match self.arch.as_str() {
            "linear" => Ok(Arch::Linear),
            "mlp" => {
                if self.hidden == 0 {
                    return Err(Error::InvalidArgument(
                        "mlp hidden width must be positive".into(),
                    ));
                }
                Ok(Arch::Mlp {
                    hidden: self.hidden,
                })
            }
            other => Err(Error::InvalidArgument(format!("unknown arch `{other}`"))),
        }
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        if self.alpha <= 0.0 || self.eta <= 0.0 || self.lr <= 0.0 {
            return Err(Error::InvalidArgument(
                "learning rates must be positive".into(),
            ));
        }
        if self.batch_synth == 0 || self.batch_target == 0 {
            return Err(Error::InvalidArgument(
                "batch sizes must be at least 1".into(),
            ));
        }
        Ok(TrainConfig {
            alpha: self.alpha,
            eta: self.eta,
            batch_synth: self.batch_synth,
            batch_target: self.batch_target,
            steps: self.steps,
            optimizer: self.optimizer()?,
            seed,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Metric names: `ndcg`, `err`, `p`.
    pub metrics: Vec<String>,
    pub k: usize,
    pub depth: usize,
    pub folds: usize,
    pub n_perm: usize,
    pub per_pos: usize,
    pub rrf_k: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            metrics: vec!["ndcg".into(), "err".into(), "p".into()],
            k: 20,
            depth: 100,
            folds: 5,
            n_perm: 100_000,
            per_pos: 1,
            rrf_k: 1.0,
        }
    }
}

impl EvalSection {
    pub fn metric_specs(&self) -> Result<Vec<(Metric, usize)>> {
        self.metrics
            .iter()
            .map(|name| Metric::parse(name).map(|m| (m, self.k)))
            .collect()
    }
}

pub fn parse_config(input: &str) -> Result<PipelineConfig> {
    toml::from_str(input).map_err(|e| Error::InvalidArgument(format!("bad config: {e}")))
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_config(&text)
}
