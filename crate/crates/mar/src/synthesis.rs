//! Weak-supervision synthesis: seed queries per document, confusable pair
//! mining through retrieval, and contrastive query extraction.
//!
//! The generator is extractive: seed queries take a document's highest
//! tf-idf terms, and contrastive queries score each candidate term of the
//! positive document against its weight in the negative document, so the
//! query captures what separates the pair. A learned generator can be
//! slotted in behind [`QueryGenerator`] later.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::corpus::{Corpus, Document, Query};
use crate::error::{Error, Result};
use crate::par::parallel_map;
use crate::retrieval::InvertedIndex;
use crate::rng::{sample_indices, seeded, stream};

/// Knobs of the synthesis pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    /// Terms per generated query (K).
    pub query_len: usize,
    /// Penalty applied to a term's weight in the negative document (lambda).
    pub contrast_penalty: f64,
    /// Retrieval depth for confusable-pair mining (R).
    pub retrieval_depth: usize,
    /// Pairs drawn per seed query (P).
    pub pairs_per_seed: usize,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            query_len: 4,
            contrast_penalty: 1.0,
            retrieval_depth: 100,
            pairs_per_seed: 1,
            seed: 42,
        }
    }
}

impl GeneratorConfig {
    fn validate(&self) -> Result<()> {
        if self.query_len < 1 {
            return Err(Error::InvalidArgument(
                "query_len must be at least 1".into(),
            ));
        }
        if self.retrieval_depth < 2 {
            return Err(Error::InvalidArgument(
                "retrieval_depth must be at least 2".into(),
            ));
        }
        if self.pairs_per_seed < 1 {
            return Err(Error::InvalidArgument(
                "pairs_per_seed must be at least 1".into(),
            ));
        }
        if self.contrast_penalty < 0.0 {
            return Err(Error::InvalidArgument(
                "contrast_penalty must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// How each triple came to be: the seed query that mined the pair and the
/// contrast score of every chosen query term.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub seed_query: Vec<String>,
    pub contrast_scores: Vec<f64>,
}

/// One synthesized weak-supervision instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTriple {
    pub query: Query,
    pub pos_doc_id: String,
    pub neg_doc_id: String,
    pub seed_doc_id: String,
    /// Absent on triples loaded back from disk.
    pub provenance: Option<Provenance>,
}

/// Interface behind which the extractive generator sits; a learned model
/// could implement this instead.
pub trait QueryGenerator {
    /// Generate query terms for a positive document, optionally against a
    /// contrastive negative.
    fn generate(
        &self,
        pos: &Document,
        neg: Option<&Document>,
        index: &InvertedIndex,
    ) -> Result<Vec<String>>;
}

/// The default tf-idf contrast extractor.
#[derive(Debug, Clone, Copy)]
pub struct ExtractiveGenerator {
    pub query_len: usize,
    pub contrast_penalty: f64,
}

impl QueryGenerator for ExtractiveGenerator {
    fn generate(
        &self,
        pos: &Document,
        neg: Option<&Document>,
        index: &InvertedIndex,
    ) -> Result<Vec<String>> {
        match neg {
            None => generate_seed_query(pos, index, self.query_len),
            Some(neg) => {
                generate_contrastive_query(pos, neg, index, self.query_len, self.contrast_penalty)
            }
        }
    }
}

/// Distinct terms of `doc` with their in-document frequency and first
/// occurrence position, in first-occurrence order.
fn term_profile(doc: &Document) -> Vec<(&str, u32, usize)> {
    let mut first_pos: BTreeMap<&str, usize> = BTreeMap::new();
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for (pos, token) in doc.tokens.iter().enumerate() {
        counts
            .entry(token.as_str())
            .and_modify(|c| *c += 1)
            .or_insert(1);
        first_pos.entry(token.as_str()).or_insert(pos);
    }
    let mut profile: Vec<(&str, u32, usize)> = counts
        .into_iter()
        .map(|(t, tf)| (t, tf, first_pos[t]))
        .collect();
    profile.sort_by_key(|&(_, _, pos)| pos);
    profile
}

/// Pick the top-`count` terms by `weight` (ties to earlier occurrence) and
/// return them in occurrence order, paired with their weights.
fn select_terms(
    profile: &[(&str, u32, usize)],
    weights: &[f64],
    count: usize,
) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..profile.len()).collect();
    order.sort_by(|&a, &b| {
        weights[b]
            .partial_cmp(&weights[a])
            .unwrap()
            .then_with(|| profile[a].2.cmp(&profile[b].2))
    });
    let mut chosen: Vec<usize> = order.into_iter().take(count).collect();
    chosen.sort_by_key(|&i| profile[i].2);
    chosen
        .into_iter()
        .map(|i| (profile[i].0.to_string(), weights[i]))
        .collect()
}

/// The K highest tf-idf terms of a document, in occurrence order.
pub fn generate_seed_query(doc: &Document, index: &InvertedIndex, k: usize) -> Result<Vec<String>> {
    if doc.tokens.is_empty() {
        return Err(Error::EmptyDocument(doc.id.clone()));
    }
    let profile = term_profile(doc);
    let weights: Vec<f64> = profile
        .iter()
        .map(|&(t, tf, _)| tf as f64 * index.idf(t))
        .collect();
    Ok(select_terms(&profile, &weights, k)
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

/// Contrastive extraction: score each distinct term of `pos` by
/// `tf(t,pos)*idf(t) - lambda*tf(t,neg)*idf(t)` and keep the top K. Falls
/// back to the seed query when the contrast degenerates (identical token
/// sequences or no positively scored term).
pub fn generate_contrastive_query(
    pos: &Document,
    neg: &Document,
    index: &InvertedIndex,
    k: usize,
    lambda: f64,
) -> Result<Vec<String>> {
    if pos.tokens.is_empty() {
        return Err(Error::EmptyDocument(pos.id.clone()));
    }
    if pos.tokens == neg.tokens {
        return generate_seed_query(pos, index, k);
    }
    let mut neg_counts: BTreeMap<&str, u32> = BTreeMap::new();
    for token in &neg.tokens {
        *neg_counts.entry(token.as_str()).or_insert(0) += 1;
    }
    let profile = term_profile(pos);
    let weights: Vec<f64> = profile
        .iter()
        .map(|&(t, tf, _)| {
            let idf = index.idf(t);
            let neg_tf = neg_counts.get(t).copied().unwrap_or(0);
            tf as f64 * idf - lambda * neg_tf as f64 * idf
        })
        .collect();
    if weights.iter().all(|&c| c <= 0.0) {
        return generate_seed_query(pos, index, k);
    }
    Ok(select_terms(&profile, &weights, k)
        .into_iter()
        .map(|(t, _)| t)
        .collect())
}

/// Contrast scores of already-chosen query terms against a pair, for
/// provenance records.
fn contrast_scores(
    terms: &[String],
    pos: &Document,
    neg: &Document,
    index: &InvertedIndex,
    lambda: f64,
) -> Vec<f64> {
    let count =
        |doc: &Document, term: &str| doc.tokens.iter().filter(|t| *t == term).count() as f64;
    terms
        .iter()
        .map(|t| {
            let idf = index.idf(t);
            count(pos, t) * idf - lambda * count(neg, t) * idf
        })
        .collect()
}

/// Mine confusable document pairs for a seed query: retrieve the top R,
/// drop the seed document, and draw P unordered pairs uniformly without
/// replacement from everything the subset offers. Within a pair the
/// document covering more seed-query terms becomes the positive (ties to
/// the lower doc id).
pub fn sample_confusable_pairs(
    index: &InvertedIndex,
    seed_query: &[String],
    retrieval_depth: usize,
    pairs: usize,
    exclude_doc_id: &str,
    seed: u64,
) -> Vec<(String, String)> {
    let subset: Vec<String> = index
        .search(seed_query, retrieval_depth)
        .into_iter()
        .map(|(doc_id, _)| doc_id)
        .filter(|doc_id| doc_id != exclude_doc_id)
        .collect();
    if subset.len() < 2 {
        return Vec::new();
    }

    // All C(n, 2) unordered pairs in retrieval-rank order.
    let mut all_pairs = Vec::with_capacity(subset.len() * (subset.len() - 1) / 2);
    for i in 0..subset.len() {
        for j in i + 1..subset.len() {
            all_pairs.push((subset[i].as_str(), subset[j].as_str()));
        }
    }
    let mut rng = seeded(seed, stream::PAIR_SAMPLING);
    let chosen = sample_indices(&mut rng, all_pairs.len(), pairs);

    let coverage = |doc_id: &str| {
        let doc = index.doc_index(doc_id).expect("doc came from search");
        let distinct: BTreeSet<&str> = seed_query.iter().map(String::as_str).collect();
        distinct
            .iter()
            .filter(|t| index.term_freq(t, doc) > 0)
            .count()
    };

    chosen
        .into_iter()
        .map(|idx| {
            let (a, b) = all_pairs[idx];
            let (cov_a, cov_b) = (coverage(a), coverage(b));
            let a_is_pos = match cov_a.cmp(&cov_b) {
                std::cmp::Ordering::Greater => true,
                std::cmp::Ordering::Less => false,
                std::cmp::Ordering::Equal => a < b,
            };
            if a_is_pos {
                (a.to_string(), b.to_string())
            } else {
                (b.to_string(), a.to_string())
            }
        })
        .collect()
}

/// Run the full synthesis pipeline over a corpus: per document, a seed
/// query, mined pairs and one contrastive query per pair. Per-document work
/// runs in parallel; the output is canonicalized by seed doc id then pair
/// order, deduplicated, and a pure function of (corpus, config).
pub fn synthesize(
    corpus: &Corpus,
    index: &InvertedIndex,
    config: &GeneratorConfig,
) -> Result<Vec<SyntheticTriple>> {
    config.validate()?;
    let mut doc_order: Vec<&Document> = corpus.docs().iter().collect();
    doc_order.sort_by(|a, b| a.id.cmp(&b.id));
    let indexed: Vec<(usize, &Document)> = doc_order.into_iter().enumerate().collect();

    let per_doc: Vec<Result<Vec<SyntheticTriple>>> = parallel_map(&indexed, |&(pos, doc)| {
        synthesize_for_doc(
            doc,
            index,
            corpus,
            config,
            crate::rng::derive(config.seed, pos as u64),
        )
    });

    let mut triples = Vec::new();
    let mut seen: BTreeSet<(String, String, String)> = BTreeSet::new();
    for result in per_doc {
        for triple in result? {
            let key = (
                triple.query.tokens.join(" "),
                triple.pos_doc_id.clone(),
                triple.neg_doc_id.clone(),
            );
            if seen.insert(key) {
                triples.push(triple);
            }
        }
    }
    // Stable ids assigned after canonicalization.
    for (i, triple) in triples.iter_mut().enumerate() {
        triple.query.id = format!("synth{i:06}");
    }
    Ok(triples)
}

fn synthesize_for_doc(
    doc: &Document,
    index: &InvertedIndex,
    corpus: &Corpus,
    config: &GeneratorConfig,
    pair_seed: u64,
) -> Result<Vec<SyntheticTriple>> {
    if doc.tokens.is_empty() {
        return Ok(Vec::new());
    }
    let seed_query = generate_seed_query(doc, index, config.query_len)?;
    let pairs = sample_confusable_pairs(
        index,
        &seed_query,
        config.retrieval_depth,
        config.pairs_per_seed,
        &doc.id,
        pair_seed,
    );
    let mut triples = Vec::with_capacity(pairs.len());
    for (pos_id, neg_id) in pairs {
        let pos = corpus.get(&pos_id).expect("retrieved from this corpus");
        let neg = corpus.get(&neg_id).expect("retrieved from this corpus");
        let terms =
            generate_contrastive_query(pos, neg, index, config.query_len, config.contrast_penalty)?;
        if terms.is_empty() {
            continue;
        }
        let scores = contrast_scores(&terms, pos, neg, index, config.contrast_penalty);
        triples.push(SyntheticTriple {
            query: Query::new("", terms.join(" ")),
            pos_doc_id: pos_id,
            neg_doc_id: neg_id,
            seed_doc_id: doc.id.clone(),
            provenance: Some(Provenance {
                seed_query: seed_query.clone(),
                contrast_scores: scores,
            }),
        });
    }
    Ok(triples)
}

/// Whether a triple's pos/neg roles were swapped by noise injection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct NoiseFlag {
    pub triple_index: usize,
    pub flipped: bool,
}

/// Swap pos/neg of each triple independently with probability `rate`
/// (seeded); returns the possibly-flipped triples and one flag per triple.
pub fn inject_noise(
    triples: &[SyntheticTriple],
    rate: f64,
    seed: u64,
) -> Result<(Vec<SyntheticTriple>, Vec<NoiseFlag>)> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!(
            "noise rate must lie in [0, 1], got {rate}"
        )));
    }
    let mut rng = seeded(seed, stream::NOISE);
    let mut out = Vec::with_capacity(triples.len());
    let mut flags = Vec::with_capacity(triples.len());
    for (i, triple) in triples.iter().enumerate() {
        let flipped = rate > 0.0 && rng.random_bool(rate);
        let mut t = triple.clone();
        if flipped {
            std::mem::swap(&mut t.pos_doc_id, &mut t.neg_doc_id);
        }
        out.push(t);
        flags.push(NoiseFlag {
            triple_index: i,
            flipped,
        });
    }
    Ok((out, flags))
}
