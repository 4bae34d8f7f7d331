//! Collections, judgments, queries, training triples and cross-validation
//! folds, plus a generator for synthetic benchmark collections with
//! controlled label noise.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::eval::RunFile;
use crate::rng::{sample_indices, seeded, stream};

/// Lowercase a text and split it on every non-alphanumeric codepoint.
///
/// Lowercasing happens per codepoint; any non-alphanumeric character a
/// lowercase expansion produces (combining marks and the like) is dropped so
/// that emitted tokens re-tokenize to themselves.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            for lc in ch.to_lowercase() {
                if lc.is_alphanumeric() {
                    current.push(lc);
                }
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// One retrievable document. `tokens` is derived from `title` + `text` at
/// construction and never mutated afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: String,
    pub title: Option<String>,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, title: Option<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = match &title {
            Some(t) => {
                let mut tok = tokenize(t);
                tok.extend(tokenize(&text));
                tok
            }
            None => tokenize(&text),
        };
        Document {
            id: id.into(),
            title,
            text,
            tokens,
        }
    }
}

/// An ordered collection of documents with unique ids.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    docs: Vec<Document>,
    by_id: HashMap<String, usize>,
}

impl Corpus {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, doc: Document) -> Result<()> {
        if self.by_id.contains_key(&doc.id) {
            return Err(Error::DuplicateDocId(doc.id));
        }
        self.by_id.insert(doc.id.clone(), self.docs.len());
        self.docs.push(doc);
        Ok(())
    }

    pub fn from_docs(docs: Vec<Document>) -> Result<Self> {
        let mut corpus = Corpus::new();
        for doc in docs {
            corpus.push(doc)?;
        }
        Ok(corpus)
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.by_id.get(id).map(|&i| &self.docs[i])
    }

    pub fn docs(&self) -> &[Document] {
        &self.docs
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Re-derive every document's tokens with the given stopword list
    /// removed. Queries have a matching helper on [`QuerySet`].
    pub fn strip_stopwords(&mut self, stopwords: &BTreeSet<String>) {
        for doc in &mut self.docs {
            doc.tokens.retain(|t| !stopwords.contains(t));
        }
    }
}

/// A search request: id, raw text and its token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub id: String,
    pub text: String,
    pub tokens: Vec<String>,
}

impl Query {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        let text = text.into();
        let tokens = tokenize(&text);
        Query {
            id: id.into(),
            text,
            tokens,
        }
    }
}

/// An ordered set of queries with unique ids.
#[derive(Debug, Clone, Default)]
pub struct QuerySet {
    queries: Vec<Query>,
    by_id: HashMap<String, usize>,
}

impl QuerySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, query: Query) -> Result<()> {
        if self.by_id.contains_key(&query.id) {
            return Err(Error::DuplicateQueryId(query.id));
        }
        self.by_id.insert(query.id.clone(), self.queries.len());
        self.queries.push(query);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&Query> {
        self.by_id.get(id).map(|&i| &self.queries[i])
    }

    pub fn queries(&self) -> &[Query] {
        &self.queries
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }

    pub fn strip_stopwords(&mut self, stopwords: &BTreeSet<String>) {
        for q in &mut self.queries {
            q.tokens.retain(|t| !stopwords.contains(t));
        }
    }
}

/// Graded relevance judgments. Grades are non-negative; looking up an
/// unjudged pair yields 0. Negative grades on ingest are clamped to 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, u32>>,
    /// Histogram of stored grades, so `g_max` stays exact when a later
    /// insert overwrites the previous maximum.
    grade_counts: BTreeMap<u32, usize>,
}

impl Qrels {
    pub fn new() -> Self {
        Self::default()
    }

    /// Store one judgment; later inserts for the same pair overwrite.
    pub fn insert(&mut self, query_id: impl Into<String>, doc_id: impl Into<String>, grade: i64) {
        let grade = grade.max(0) as u32;
        let previous = self
            .judgments
            .entry(query_id.into())
            .or_default()
            .insert(doc_id.into(), grade);
        if let Some(old) = previous {
            match self.grade_counts.get_mut(&old) {
                Some(count) if *count > 1 => *count -= 1,
                _ => {
                    self.grade_counts.remove(&old);
                }
            }
        }
        *self.grade_counts.entry(grade).or_insert(0) += 1;
    }

    pub fn grade(&self, query_id: &str, doc_id: &str) -> u32 {
        self.judgments
            .get(query_id)
            .and_then(|m| m.get(doc_id))
            .copied()
            .unwrap_or(0)
    }

    pub fn g_max(&self) -> u32 {
        self.grade_counts.keys().next_back().copied().unwrap_or(0)
    }

    /// Judged (doc, grade) pairs for one query, in doc-id order.
    pub fn judged(&self, query_id: &str) -> impl Iterator<Item = (&str, u32)> {
        self.judgments
            .get(query_id)
            .into_iter()
            .flat_map(|m| m.iter().map(|(d, &g)| (d.as_str(), g)))
    }

    pub fn query_ids(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    /// All queries and their judgments, in query-id order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeMap<String, u32>)> {
        self.judgments.iter().map(|(q, m)| (q.as_str(), m))
    }

    pub fn n_judgments(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }
}

/// A pairwise training instance built from judgments: the positive document
/// carries a strictly higher grade than the negative one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingTriple {
    pub query_id: String,
    pub pos_doc_id: String,
    pub neg_doc_id: String,
}

/// Assignment of query ids to cross-validation folds.
#[derive(Debug, Clone)]
pub struct FoldAssignment {
    fold_of: BTreeMap<String, usize>,
    k: usize,
}

impl FoldAssignment {
    pub fn fold_of(&self, query_id: &str) -> Option<usize> {
        self.fold_of.get(query_id).copied()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.fold_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fold_of.is_empty()
    }

    /// Query ids assigned to `fold`, in id order.
    pub fn queries_in(&self, fold: usize) -> Vec<&str> {
        self.fold_of
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(q, _)| q.as_str())
            .collect()
    }
}

/// Partition `query_ids` into `k` folds whose sizes differ by at most one.
/// The shuffle is a pure function of `seed`.
pub fn make_folds(query_ids: &[String], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "fold count must be at least 2, got {k}"
        )));
    }
    if query_ids.len() < k {
        return Err(Error::InvalidArgument(format!(
            "cannot split {} queries into {} folds",
            query_ids.len(),
            k
        )));
    }
    let unique: BTreeSet<&String> = query_ids.iter().collect();
    if unique.len() != query_ids.len() {
        return Err(Error::InvalidArgument(
            "query ids for fold assignment must be unique".into(),
        ));
    }
    let mut shuffled: Vec<&String> = query_ids.iter().collect();
    let mut rng = seeded(seed, stream::FOLDS);
    shuffled.shuffle(&mut rng);
    let fold_of = shuffled
        .iter()
        .enumerate()
        .map(|(i, q)| ((*q).clone(), i % k))
        .collect();
    Ok(FoldAssignment { fold_of, k })
}

/// Build pairwise triples from judgments and a first-stage run.
///
/// For every judged-positive document of a query, up to `per_pos` distinct
/// grade-0 documents are drawn uniformly (seeded) from that query's run
/// candidates. Queries missing from the run, without positives, or without
/// grade-0 candidates contribute nothing.
pub fn build_triples(
    qrels: &Qrels,
    run: &RunFile,
    per_pos: usize,
    seed: u64,
) -> Vec<TrainingTriple> {
    let mut rng = seeded(seed, stream::TRIPLES);
    let mut triples = Vec::new();
    for (query_id, judged) in qrels.iter() {
        let Some(entries) = run.entries(query_id) else {
            continue;
        };
        let negatives: Vec<&str> = entries
            .iter()
            .filter(|e| qrels.grade(query_id, &e.doc_id) == 0)
            .map(|e| e.doc_id.as_str())
            .collect();
        if negatives.is_empty() {
            continue;
        }
        for (pos_doc, &grade) in judged {
            if grade == 0 {
                continue;
            }
            for idx in sample_indices(&mut rng, negatives.len(), per_pos) {
                triples.push(TrainingTriple {
                    query_id: query_id.to_string(),
                    pos_doc_id: pos_doc.to_string(),
                    neg_doc_id: negatives[idx].to_string(),
                });
            }
        }
    }
    triples
}

// ---------------------------------------------------------------------------
// Synthetic benchmark collections
// ---------------------------------------------------------------------------

/// Parameters of a generated benchmark collection.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n_topics: usize,
    pub docs_per_topic: usize,
    pub n_queries: usize,
    pub vocab_size: usize,
    pub doc_len: usize,
    /// Fraction of later-derived synthetic triples whose pos/neg roles get
    /// swapped by [`crate::synthesis::inject_noise`].
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_topics: 4,
            docs_per_topic: 50,
            n_queries: 40,
            vocab_size: 40,
            doc_len: 30,
            noise_rate: 0.3,
            seed: 42,
        }
    }
}

/// Share of document tokens drawn from the document's own topic pool.
const TOPIC_TOKEN_PROB: f64 = 0.70;
/// Share of document tokens drawn from a foreign topic pool; these leaks are
/// what make off-topic documents retrievable confusions. The remainder of
/// the token mass comes from the shared background pool.
const FOREIGN_TOKEN_PROB: f64 = 0.25;
/// Distinct topic terms per generated query.
const QUERY_TERMS: usize = 3;
/// Probability that a same-topic document is judged grade 2 instead of 1.
const GRADE2_PROB: f64 = 0.25;
/// Probability that a token repeats the previous one instead of drawing
/// fresh; bursty term counts give documents realistically skewed tf
/// profiles (and make repeated leak terms genuinely confusable).
const BURST_PROB: f64 = 0.45;

/// A generated collection plus everything needed to replay its noise plan.
#[derive(Debug, Clone)]
pub struct SyntheticCollection {
    pub corpus: Corpus,
    pub queries: QuerySet,
    pub qrels: Qrels,
    /// Topic index per query, parallel to `queries`.
    pub query_topic: Vec<usize>,
    pub noise_rate: f64,
    pub noise_seed: u64,
}

/// Generate a topical benchmark collection. Topics own disjoint term pools
/// next to a shared background pool, so ground-truth relevance (same topic)
/// is unambiguous. Identical specs produce bit-identical collections.
pub fn generate_synthetic_collection(spec: &SyntheticSpec) -> Result<SyntheticCollection> {
    if spec.n_topics == 0 || spec.docs_per_topic == 0 || spec.n_queries == 0 || spec.doc_len == 0 {
        return Err(Error::InvalidArgument(
            "synthetic collection counts must be positive".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.noise_rate) {
        return Err(Error::InvalidArgument(format!(
            "noise rate must lie in [0, 1], got {}",
            spec.noise_rate
        )));
    }
    let pool_size = spec.vocab_size / (spec.n_topics + 1);
    if pool_size < QUERY_TERMS {
        return Err(Error::InvalidArgument(format!(
            "vocabulary of {} cannot form {} disjoint topic pools of at least {} terms",
            spec.vocab_size, spec.n_topics, QUERY_TERMS
        )));
    }

    let vocab: Vec<String> = (0..spec.vocab_size).map(|i| format!("w{i:04}")).collect();
    let topic_pool = |topic: usize| &vocab[topic * pool_size..(topic + 1) * pool_size];
    let background = &vocab[spec.n_topics * pool_size..];

    let mut rng = seeded(spec.seed, stream::COLLECTION);

    let mut corpus = Corpus::new();
    for topic in 0..spec.n_topics {
        for d in 0..spec.docs_per_topic {
            let doc_index = topic * spec.docs_per_topic + d;
            // `doc_len` is the mean length; actual lengths spread around it.
            let len = rng.random_range(spec.doc_len.div_ceil(2)..=spec.doc_len + spec.doc_len / 2);
            let mut tokens: Vec<String> = Vec::with_capacity(len);
            for _ in 0..len {
                if !tokens.is_empty() && rng.random_bool(BURST_PROB) {
                    tokens.push(tokens.last().expect("nonempty").clone());
                    continue;
                }
                let roll: f64 = rng.random();
                let pool: &[String] = if roll < TOPIC_TOKEN_PROB {
                    topic_pool(topic)
                } else if roll < TOPIC_TOKEN_PROB + FOREIGN_TOKEN_PROB && spec.n_topics > 1 {
                    // a leaked term from some other topic
                    let mut other = rng.random_range(0..spec.n_topics - 1);
                    if other >= topic {
                        other += 1;
                    }
                    topic_pool(other)
                } else {
                    background
                };
                tokens.push(pool[rng.random_range(0..pool.len())].clone());
            }
            corpus.push(Document::new(
                format!("d{doc_index:04}"),
                None,
                tokens.join(" "),
            ))?;
        }
    }

    let mut queries = QuerySet::new();
    let mut query_topic = Vec::with_capacity(spec.n_queries);
    for q in 0..spec.n_queries {
        let topic = q % spec.n_topics;
        let pool = topic_pool(topic);
        let terms: Vec<&str> = sample_indices(&mut rng, pool.len(), QUERY_TERMS)
            .into_iter()
            .map(|i| pool[i].as_str())
            .collect();
        queries.push(Query::new(format!("q{q:03}"), terms.join(" ")))?;
        query_topic.push(topic);
    }

    let mut qrels = Qrels::new();
    for (q, &topic) in query_topic.iter().enumerate() {
        let query_id = format!("q{q:03}");
        for d in 0..spec.docs_per_topic {
            let doc_index = topic * spec.docs_per_topic + d;
            let grade = if rng.random_bool(GRADE2_PROB) { 2 } else { 1 };
            qrels.insert(&query_id, format!("d{doc_index:04}"), grade);
        }
    }

    Ok(SyntheticCollection {
        corpus,
        queries,
        qrels,
        query_topic,
        noise_rate: spec.noise_rate,
        noise_seed: spec.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::RunEntry;
    use proptest::prelude::*;

    #[test]
    fn tokenize_splits_and_lowercases() {
        assert_eq!(
            tokenize("Solar-Panel subsidy"),
            vec!["solar", "panel", "subsidy"]
        );
        assert_eq!(tokenize(""), Vec::<String>::new());
        assert_eq!(tokenize("COVID-19 (2020)"), vec!["covid", "19", "2020"]);
    }

    #[test]
    fn tokenize_drops_empty_segments() {
        assert_eq!(tokenize("--a--b--"), vec!["a", "b"]);
        assert_eq!(tokenize("   "), Vec::<String>::new());
    }

    proptest! {
        #[test]
        fn tokenize_is_idempotent(text in "\\PC*") {
            let once = tokenize(&text);
            let twice = tokenize(&once.join(" "));
            prop_assert_eq!(once, twice);
        }
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let mut corpus = Corpus::new();
        corpus.push(Document::new("d1", None, "a")).unwrap();
        let err = corpus.push(Document::new("d1", None, "b")).unwrap_err();
        assert!(matches!(err, Error::DuplicateDocId(id) if id == "d1"));
    }

    #[test]
    fn qrels_clamp_and_default() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 2);
        qrels.insert("q1", "d2", -1);
        assert_eq!(qrels.grade("q1", "d1"), 2);
        assert_eq!(qrels.grade("q1", "d2"), 0);
        assert_eq!(qrels.grade("q1", "d9"), 0);
        assert_eq!(qrels.g_max(), 2);
    }

    #[test]
    fn qrels_g_max_tracks_overwrites() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 5);
        assert_eq!(qrels.g_max(), 5);
        qrels.insert("q1", "d1", 1);
        assert_eq!(qrels.grade("q1", "d1"), 1);
        assert_eq!(qrels.g_max(), 1);
        qrels.insert("q1", "d2", 3);
        qrels.insert("q2", "d1", 3);
        qrels.insert("q1", "d2", 0);
        assert_eq!(qrels.g_max(), 3);
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("q{i}")).collect()
    }

    #[test]
    fn folds_are_balanced_and_deterministic() {
        let queries = ids(10);
        let folds = make_folds(&queries, 5, 7).unwrap();
        let mut sizes = vec![0usize; 5];
        for q in &queries {
            sizes[folds.fold_of(q).unwrap()] += 1;
        }
        assert_eq!(sizes, vec![2; 5]);

        let again = make_folds(&queries, 5, 7).unwrap();
        for q in &queries {
            assert_eq!(folds.fold_of(q), again.fold_of(q));
        }
    }

    #[test]
    fn folds_spread_remainder() {
        let folds = make_folds(&ids(11), 5, 3).unwrap();
        let mut sizes = vec![0usize; 5];
        for i in 0..11 {
            sizes[folds.fold_of(&format!("q{i}")).unwrap()] += 1;
        }
        sizes.sort_unstable();
        assert_eq!(sizes, vec![2, 2, 2, 2, 3]);
    }

    #[test]
    fn folds_reject_small_query_sets() {
        assert!(make_folds(&ids(4), 5, 0).is_err());
        assert!(make_folds(&ids(4), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_queries(n in 5usize..40, k in 2usize..5, seed in 0u64..100) {
            prop_assume!(n >= k);
            let queries = ids(n);
            let folds = make_folds(&queries, k, seed).unwrap();
            let total: usize = (0..k).map(|f| folds.queries_in(f).len()).sum();
            prop_assert_eq!(total, n);
            for q in &queries {
                prop_assert!(folds.fold_of(q).unwrap() < k);
            }
        }
    }

    fn run_with(query_id: &str, doc_ids: &[&str]) -> RunFile {
        let mut run = RunFile::new("test");
        for (i, d) in doc_ids.iter().enumerate() {
            run.push(
                query_id,
                RunEntry {
                    doc_id: d.to_string(),
                    score: (doc_ids.len() - i) as f64,
                    rank: i + 1,
                },
            );
        }
        run
    }

    #[test]
    fn triples_pair_positives_with_distinct_negatives() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        let run = run_with("q1", &["d1", "d2", "d3", "d4"]);
        let triples = build_triples(&qrels, &run, 2, 11);
        assert_eq!(triples.len(), 2);
        assert_ne!(triples[0].neg_doc_id, triples[1].neg_doc_id);
        for t in &triples {
            assert_eq!(t.pos_doc_id, "d1");
            assert!(qrels.grade("q1", &t.pos_doc_id) > qrels.grade("q1", &t.neg_doc_id));
        }
    }

    #[test]
    fn triples_skip_queries_without_negatives() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        qrels.insert("q1", "d2", 2);
        let run = run_with("q1", &["d1", "d2"]);
        assert!(build_triples(&qrels, &run, 3, 0).is_empty());
    }

    #[test]
    fn triples_are_deterministic() {
        let mut qrels = Qrels::new();
        qrels.insert("q1", "d1", 1);
        qrels.insert("q1", "d2", 2);
        let run = run_with("q1", &["d1", "d2", "d3", "d4", "d5"]);
        let a = build_triples(&qrels, &run, 2, 99);
        let b = build_triples(&qrels, &run, 2, 99);
        assert_eq!(a, b);
        assert_eq!(a.len(), 4);
    }

    #[test]
    fn synthetic_collection_shape() {
        let spec = SyntheticSpec {
            n_topics: 2,
            docs_per_topic: 3,
            n_queries: 4,
            vocab_size: 30,
            doc_len: 60,
            noise_rate: 0.0,
            seed: 5,
        };
        let coll = generate_synthetic_collection(&spec).unwrap();
        assert_eq!(coll.corpus.len(), 6);
        assert_eq!(coll.queries.len(), 4);

        // Brute-force token-pool membership: every document draws at least
        // half of its tokens from its own topic pool.
        let pool_size = spec.vocab_size / (spec.n_topics + 1);
        for (i, doc) in coll.corpus.docs().iter().enumerate() {
            let topic = i / spec.docs_per_topic;
            let own: usize = doc
                .tokens
                .iter()
                .filter(|t| {
                    let idx: usize = t[1..].parse().unwrap();
                    idx >= topic * pool_size && idx < (topic + 1) * pool_size
                })
                .count();
            assert!(
                own * 2 >= doc.tokens.len(),
                "doc {} has only {}/{} own-topic tokens",
                doc.id,
                own,
                doc.tokens.len()
            );
        }
    }

    #[test]
    fn synthetic_collection_is_deterministic() {
        let spec = SyntheticSpec::default();
        let a = generate_synthetic_collection(&spec).unwrap();
        let b = generate_synthetic_collection(&spec).unwrap();
        assert_eq!(a.corpus.docs(), b.corpus.docs());
        assert_eq!(a.queries.queries(), b.queries.queries());
        assert_eq!(a.qrels, b.qrels);
    }

    #[test]
    fn synthetic_collection_rejects_tiny_vocab() {
        let spec = SyntheticSpec {
            vocab_size: 5,
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic_collection(&spec).is_err());
    }

    #[test]
    fn synthetic_qrels_mark_same_topic_docs() {
        let coll = generate_synthetic_collection(&SyntheticSpec {
            n_topics: 2,
            docs_per_topic: 4,
            n_queries: 2,
            vocab_size: 30,
            doc_len: 20,
            noise_rate: 0.0,
            seed: 1,
        })
        .unwrap();
        // q000 belongs to topic 0: its relevant docs are exactly d0000..d0003.
        for d in 0..4 {
            assert!(coll.qrels.grade("q000", &format!("d{d:04}")) >= 1);
        }
        for d in 4..8 {
            assert_eq!(coll.qrels.grade("q000", &format!("d{d:04}")), 0);
        }
    }
}
