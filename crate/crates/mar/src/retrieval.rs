//! Inverted index and BM25 first-stage retrieval.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::corpus::{Corpus, Query};
use crate::error::{Error, Result};
use crate::eval::{RunEntry, RunFile};

/// BM25 constants. Defaults follow the usual Anserini tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 0.9, b: 0.4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Posting {
    pub doc: usize,
    pub tf: u32,
}

/// A ranked result list for one query: scores descending, ties broken by
/// ascending doc id, no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredList {
    pub query_id: String,
    pub entries: Vec<(String, f64)>,
}

impl ScoredList {
    /// Assemble per-query scored lists into a tagged run.
    pub fn into_run(lists: Vec<ScoredList>, tag: impl Into<String>) -> RunFile {
        let mut run = RunFile::new(tag);
        for list in lists {
            for (rank, (doc_id, score)) in list.entries.into_iter().enumerate() {
                run.push(
                    &list.query_id,
                    RunEntry {
                        doc_id,
                        score,
                        rank: rank + 1,
                    },
                );
            }
        }
        run
    }
}

/// Frozen postings and document statistics for a corpus; read-only after
/// construction and safe to share across threads.
#[derive(Debug, Clone)]
pub struct InvertedIndex {
    params: Bm25Params,
    doc_ids: Vec<String>,
    by_id: HashMap<String, usize>,
    postings: BTreeMap<String, Vec<Posting>>,
    doc_len: Vec<usize>,
    avg_doc_len: f64,
    /// Euclidean norm of each document's tf-idf vector, precomputed for the
    /// cosine feature.
    tfidf_norm: Vec<f64>,
}

impl InvertedIndex {
    pub fn build(corpus: &Corpus) -> Result<Self> {
        Self::build_with_params(corpus, Bm25Params::default())
    }

    pub fn build_with_params(corpus: &Corpus, params: Bm25Params) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let mut doc_ids = Vec::with_capacity(corpus.len());
        let mut by_id = HashMap::with_capacity(corpus.len());
        let mut doc_len = Vec::with_capacity(corpus.len());
        let mut postings: BTreeMap<String, Vec<Posting>> = BTreeMap::new();

        for (idx, doc) in corpus.docs().iter().enumerate() {
            by_id.insert(doc.id.clone(), idx);
            doc_ids.push(doc.id.clone());
            doc_len.push(doc.tokens.len());
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for token in &doc.tokens {
                *counts.entry(token.as_str()).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings
                    .entry(term.to_string())
                    .or_default()
                    .push(Posting { doc: idx, tf });
            }
        }

        let total: usize = doc_len.iter().sum();
        let avg_doc_len = total as f64 / doc_len.len() as f64;

        let mut index = InvertedIndex {
            params,
            doc_ids,
            by_id,
            postings,
            doc_len,
            avg_doc_len,
            tfidf_norm: Vec::new(),
        };
        let mut norm_sq = vec![0.0f64; index.doc_len.len()];
        for (term, plist) in &index.postings {
            let idf = index.idf(term);
            for p in plist {
                let w = p.tf as f64 * idf;
                norm_sq[p.doc] += w * w;
            }
        }
        index.tfidf_norm = norm_sq.into_iter().map(f64::sqrt).collect();
        Ok(index)
    }

    pub fn params(&self) -> Bm25Params {
        self.params
    }

    pub fn n_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn avg_doc_len(&self) -> f64 {
        self.avg_doc_len
    }

    pub fn n_terms(&self) -> usize {
        self.postings.len()
    }

    pub fn doc_index(&self, doc_id: &str) -> Option<usize> {
        self.by_id.get(doc_id).copied()
    }

    pub fn doc_id(&self, idx: usize) -> &str {
        &self.doc_ids[idx]
    }

    pub fn doc_len(&self, idx: usize) -> usize {
        self.doc_len[idx]
    }

    pub fn doc_freq(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_freq(&self, term: &str, doc: usize) -> u32 {
        self.postings.get(term).map_or(0, |plist| {
            plist
                .binary_search_by_key(&doc, |p| p.doc)
                .map(|i| plist[i].tf)
                .unwrap_or(0)
        })
    }

    pub fn tfidf_norm(&self, doc: usize) -> f64 {
        self.tfidf_norm[doc]
    }

    /// Inverse document frequency, ln(1 + (N - df + 0.5)/(df + 0.5)).
    /// Strictly positive for every df <= N, including unseen terms.
    pub fn idf(&self, term: &str) -> f64 {
        let n = self.n_docs() as f64;
        let df = self.doc_freq(term) as f64;
        (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
    }

    /// Distinct query terms in sorted order; scoring treats the query as a
    /// term set, so multiplicity never matters.
    fn distinct_terms(query_tokens: &[String]) -> BTreeSet<&str> {
        query_tokens.iter().map(String::as_str).collect()
    }

    fn term_contribution(&self, idf: f64, tf: u32, len: usize) -> f64 {
        let Bm25Params { k1, b } = self.params;
        let tf = tf as f64;
        let norm = k1 * (1.0 - b + b * len as f64 / self.avg_doc_len);
        idf * tf * (k1 + 1.0) / (tf + norm)
    }

    /// BM25 score of one document for a query.
    pub fn bm25(&self, query_tokens: &[String], doc_id: &str) -> Result<f64> {
        let doc = self
            .doc_index(doc_id)
            .ok_or_else(|| Error::UnknownDoc(doc_id.to_string()))?;
        Ok(self.bm25_by_index(query_tokens, doc))
    }

    fn bm25_by_index(&self, query_tokens: &[String], doc: usize) -> f64 {
        let mut score = 0.0;
        for term in Self::distinct_terms(query_tokens) {
            let tf = self.term_freq(term, doc);
            if tf == 0 {
                continue;
            }
            score += self.term_contribution(self.idf(term), tf, self.doc_len[doc]);
        }
        score
    }

    /// Top-`k` documents by BM25, ties broken by ascending doc id. Documents
    /// matching no query term are never returned.
    pub fn search(&self, query_tokens: &[String], k: usize) -> Vec<(String, f64)> {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        // Iterate terms in sorted order so each document's score accumulates
        // in a fixed order and bit-equals `bm25` on the same query.
        for term in Self::distinct_terms(query_tokens) {
            let Some(plist) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for p in plist {
                *acc.entry(p.doc).or_insert(0.0) +=
                    self.term_contribution(idf, p.tf, self.doc_len[p.doc]);
            }
        }
        let mut scored: Vec<(String, f64)> = acc
            .into_iter()
            .filter(|&(_, s)| s > 0.0)
            .map(|(doc, s)| (self.doc_ids[doc].clone(), s))
            .collect();
        scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    /// `search` packaged as a [`ScoredList`] for a full query.
    pub fn scored_list(&self, query: &Query, k: usize) -> ScoredList {
        ScoredList {
            query_id: query.id.clone(),
            entries: self.search(&query.tokens, k),
        }
    }

    /// Run retrieval for every query in the set at depth `k`.
    pub fn search_all(&self, queries: &crate::corpus::QuerySet, k: usize, tag: &str) -> RunFile {
        let lists = queries
            .queries()
            .iter()
            .map(|q| self.scored_list(q, k))
            .collect();
        ScoredList::into_run(lists, tag)
    }
}
