//! The differentiable scorer: fixed match features feeding a linear or
//! one-hidden-layer tanh head, the pairwise hinge loss, closed-form
//! gradients and a central-difference oracle.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Query;
use crate::error::{Error, Result};
use crate::retrieval::InvertedIndex;
use crate::rng::{seeded, stream};

/// Number of match features; the order below is part of the on-disk
/// contract for serialized parameters.
pub const NUM_FEATURES: usize = 6;

/// Fixed-order match features for one (query, document) pair:
/// `[bm25, ln(1 + sum matched tf), term coverage, idf-weighted coverage,
/// doc_len/avg_doc_len, tf-idf cosine]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Compute the feature vector for a query-document pair.
pub fn extract_features(
    query: &Query,
    doc_id: &str,
    index: &InvertedIndex,
) -> Result<FeatureVector> {
    if query.tokens.is_empty() {
        return Err(Error::EmptyQuery(query.id.clone()));
    }
    let doc = index
        .doc_index(doc_id)
        .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;

    let distinct: BTreeSet<&str> = query.tokens.iter().map(String::as_str).collect();
    let mut matched_tf = 0u64;
    let mut present = 0usize;
    let mut idf_present = 0.0;
    let mut idf_total = 0.0;
    for &term in &distinct {
        let idf = index.idf(term);
        idf_total += idf;
        let tf = index.term_freq(term, doc);
        if tf > 0 {
            matched_tf += tf as u64;
            present += 1;
            idf_present += idf;
        }
    }

    let bm25 = index.bm25(&query.tokens, doc_id)?;
    let log_tf = (1.0 + matched_tf as f64).ln();
    let coverage = present as f64 / distinct.len() as f64;
    let idf_coverage = idf_present / idf_total;
    let len_ratio = index.doc_len(doc) as f64 / index.avg_doc_len();

    // Cosine between the query and document tf-idf vectors. Query-side tf
    // keeps token multiplicity; the document norm is precomputed at build.
    let mut dot = 0.0;
    let mut q_norm_sq = 0.0;
    for &term in &distinct {
        let q_tf = query.tokens.iter().filter(|t| t.as_str() == term).count() as f64;
        let idf = index.idf(term);
        let qw = q_tf * idf;
        q_norm_sq += qw * qw;
        let tf = index.term_freq(term, doc);
        if tf > 0 {
            dot += qw * tf as f64 * idf;
        }
    }
    let d_norm = index.tfidf_norm(doc);
    let cosine = if q_norm_sq > 0.0 && d_norm > 0.0 {
        dot / (q_norm_sq.sqrt() * d_norm)
    } else {
        0.0
    };

    Ok(FeatureVector([
        bm25,
        log_tf,
        coverage,
        idf_coverage,
        len_ratio,
        cosine,
    ]))
}

/// Scorer architecture. The MLP uses one tanh hidden layer; its flat
/// parameter layout is row-major W, then c, then v, then b.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Arch {
    Linear,
    Mlp { hidden: usize },
}

impl Arch {
    pub fn param_count(self) -> usize {
        match self {
            Arch::Linear => NUM_FEATURES + 1,
            Arch::Mlp { hidden } => NUM_FEATURES * hidden + hidden + hidden + 1,
        }
    }
}

/// Flat parameter vector of the scorer; the length always matches the
/// architecture, which constructors and deserialization enforce.
#[derive(Debug, Clone, PartialEq)]
pub struct RankerParams {
    arch: Arch,
    theta: Vec<f64>,
}

impl RankerParams {
    pub fn new(arch: Arch, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != arch.param_count() {
            return Err(Error::ShapeMismatch(format!(
                "architecture expects {} parameters, got {}",
                arch.param_count(),
                theta.len()
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "ranker parameters must be finite".into(),
            ));
        }
        Ok(RankerParams { arch, theta })
    }

    pub fn zeros(arch: Arch) -> Self {
        RankerParams {
            arch,
            theta: vec![0.0; arch.param_count()],
        }
    }

    /// Seeded init, uniform in [-0.1, 0.1].
    pub fn seeded_init(arch: Arch, seed: u64) -> Self {
        let mut rng = seeded(seed, stream::PARAM_INIT);
        let theta = (0..arch.param_count())
            .map(|_| rng.random_range(-0.1..0.1))
            .collect();
        RankerParams { arch, theta }
    }

    pub fn arch(&self) -> Arch {
        self.arch
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Mutable view of the parameters; the slice keeps the length fixed.
    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }
}

/// Gradient with respect to the flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient(pub Vec<f64>);

impl Gradient {
    pub fn zeros(len: usize) -> Self {
        Gradient(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &Gradient) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }
}

/// Ranking score in (-1, 1).
pub fn score(params: &RankerParams, x: &FeatureVector) -> f64 {
    match params.arch {
        Arch::Linear => {
            let (w, b) = split_linear(&params.theta);
            (dot(w, &x.0) + b).tanh()
        }
        Arch::Mlp { hidden } => {
            let (weights, c, v, b) = split_mlp(&params.theta, hidden);
            let mut out = b;
            for i in 0..hidden {
                let row = &weights[i * NUM_FEATURES..(i + 1) * NUM_FEATURES];
                out += v[i] * (dot(row, &x.0) + c[i]).tanh();
            }
            out.tanh()
        }
    }
}

/// Features of one pairwise example; the positive side should outscore the
/// negative side after training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairExample {
    pub pos: FeatureVector,
    pub neg: FeatureVector,
}

impl PairExample {
    /// Extract both sides of a triple against the index.
    pub fn from_docs(
        query: &Query,
        pos_doc_id: &str,
        neg_doc_id: &str,
        index: &InvertedIndex,
    ) -> Result<Self> {
        Ok(PairExample {
            pos: extract_features(query, pos_doc_id, index)?,
            neg: extract_features(query, neg_doc_id, index)?,
        })
    }
}

/// Score difference f(q, d+) - f(q, d-).
pub fn margin(params: &RankerParams, example: &PairExample) -> f64 {
    score(params, &example.pos) - score(params, &example.neg)
}

/// Pairwise hinge loss, relu(1 - margin). Always in [0, 3) because each
/// score lies in (-1, 1).
pub fn pairwise_loss(params: &RankerParams, example: &PairExample) -> f64 {
    (1.0 - margin(params, example)).max(0.0)
}

/// Exact gradient of the hinge loss. The relu subgradient at 0 is taken as
/// 0, so satisfied pairs (margin >= 1) contribute nothing.
pub fn grad(params: &RankerParams, example: &PairExample) -> Gradient {
    if 1.0 - margin(params, example) <= 0.0 {
        return Gradient::zeros(params.len());
    }
    let mut g = vec![0.0; params.len()];
    // d loss / d theta = -(d s+ / d theta) + (d s- / d theta)
    accumulate_score_grad(params, &example.pos, -1.0, &mut g);
    accumulate_score_grad(params, &example.neg, 1.0, &mut g);
    Gradient(g)
}

/// Central-difference gradient of the hinge loss, (L(theta + eps e_k) -
/// L(theta - eps e_k)) / (2 eps) per coordinate.
pub fn finite_diff_grad(params: &RankerParams, example: &PairExample, eps: f64) -> Gradient {
    central_diff(params, eps, |p| pairwise_loss(p, example))
}

/// Central differences of an arbitrary scalar function of the parameters.
pub fn central_diff(params: &RankerParams, eps: f64, f: impl Fn(&RankerParams) -> f64) -> Gradient {
    let mut probe = params.clone();
    let mut g = vec![0.0; params.len()];
    for (k, gk) in g.iter_mut().enumerate() {
        let original = probe.theta()[k];
        probe.theta_mut()[k] = original + eps;
        let up = f(&probe);
        probe.theta_mut()[k] = original - eps;
        let down = f(&probe);
        probe.theta_mut()[k] = original;
        *gk = (up - down) / (2.0 * eps);
    }
    Gradient(g)
}

/// Add `factor * d score(x) / d theta` into `out`.
fn accumulate_score_grad(params: &RankerParams, x: &FeatureVector, factor: f64, out: &mut [f64]) {
    match params.arch {
        Arch::Linear => {
            let (w, b) = split_linear(&params.theta);
            let s = (dot(w, &x.0) + b).tanh();
            let scale = factor * (1.0 - s * s);
            for (o, xi) in out[..NUM_FEATURES].iter_mut().zip(&x.0) {
                *o += scale * xi;
            }
            out[NUM_FEATURES] += scale;
        }
        Arch::Mlp { hidden } => {
            let (weights, c, v, b) = split_mlp(&params.theta, hidden);
            let mut act = vec![0.0; hidden];
            let mut z_out = b;
            for i in 0..hidden {
                let row = &weights[i * NUM_FEATURES..(i + 1) * NUM_FEATURES];
                act[i] = (dot(row, &x.0) + c[i]).tanh();
                z_out += v[i] * act[i];
            }
            let s = z_out.tanh();
            let scale = factor * (1.0 - s * s);
            let (w_len, c_len) = (NUM_FEATURES * hidden, hidden);
            for i in 0..hidden {
                let hidden_scale = scale * v[i] * (1.0 - act[i] * act[i]);
                for j in 0..NUM_FEATURES {
                    out[i * NUM_FEATURES + j] += hidden_scale * x.0[j];
                }
                out[w_len + i] += hidden_scale;
                out[w_len + c_len + i] += scale * act[i];
            }
            out[w_len + 2 * c_len] += scale;
        }
    }
}

fn split_linear(theta: &[f64]) -> (&[f64], f64) {
    (&theta[..NUM_FEATURES], theta[NUM_FEATURES])
}

fn split_mlp(theta: &[f64], hidden: usize) -> (&[f64], &[f64], &[f64], f64) {
    let w_len = NUM_FEATURES * hidden;
    (
        &theta[..w_len],
        &theta[w_len..w_len + hidden],
        &theta[w_len + hidden..w_len + 2 * hidden],
        theta[w_len + 2 * hidden],
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
