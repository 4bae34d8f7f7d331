//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured quantity. Criteria 6 and 7 share one benchmark run.

use std::sync::OnceLock;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use mar::corpus::{Corpus, Document, Qrels, Query};
use mar::eval::{err_at_k, ndcg_at_k, precision_at_k, rrf, RunEntry, RunFile};
use mar::experiment::{run_noise_bench, write_noise_bench, NoiseBenchConfig, NoiseBenchReport};
use mar::metatrain::{meta_backward, meta_grad_fd, normalize_weights};
use mar::ranker::{
    extract_features, finite_diff_grad, grad, margin, Arch, PairExample, RankerParams,
};
use mar::retrieval::InvertedIndex;

// ---------------------------------------------------------------------------
// shared fixtures
// ---------------------------------------------------------------------------

/// A randomized corpus over a small vocabulary, plus its index.
fn random_corpus(
    rng: &mut ChaCha20Rng,
    n_docs: usize,
    vocab: usize,
    doc_len: usize,
) -> (Corpus, InvertedIndex) {
    let corpus = Corpus::from_docs(
        (0..n_docs)
            .map(|d| {
                let len = rng.random_range(1..=doc_len);
                let text: Vec<String> = (0..len)
                    .map(|_| format!("t{}", rng.random_range(0..vocab)))
                    .collect();
                Document::new(format!("d{d:03}"), None, text.join(" "))
            })
            .collect(),
    )
    .unwrap();
    let index = InvertedIndex::build(&corpus).unwrap();
    (corpus, index)
}

/// A random pair example with features extracted from real documents.
fn random_example(rng: &mut ChaCha20Rng, corpus: &Corpus, index: &InvertedIndex) -> PairExample {
    let n = corpus.len();
    loop {
        let seed_doc = &corpus.docs()[rng.random_range(0..n)];
        if seed_doc.tokens.is_empty() {
            continue;
        }
        let n_terms = rng.random_range(1..=3.min(seed_doc.tokens.len()));
        let terms: Vec<String> = (0..n_terms)
            .map(|_| seed_doc.tokens[rng.random_range(0..seed_doc.tokens.len())].clone())
            .collect();
        let query = Query::new("q", terms.join(" "));
        let pos = &corpus.docs()[rng.random_range(0..n)];
        let neg = &corpus.docs()[rng.random_range(0..n)];
        if pos.id == neg.id {
            continue;
        }
        return PairExample {
            pos: extract_features(&query, &pos.id, index).unwrap(),
            neg: extract_features(&query, &neg.id, index).unwrap(),
        };
    }
}

fn random_params(rng: &mut ChaCha20Rng) -> RankerParams {
    let arch = if rng.random_bool(0.5) {
        Arch::Linear
    } else {
        Arch::Mlp { hidden: 8 }
    };
    RankerParams::seeded_init(arch, rng.random_range(0..u64::MAX / 2))
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// criterion 1: gradient exactness
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gradient_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(101);
    let (corpus, index) = random_corpus(&mut rng, 30, 40, 12);

    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 100 {
        let params = random_params(&mut rng);
        let example = random_example(&mut rng, &corpus, &index);
        if (margin(&params, &example) - 1.0).abs() <= 1e-3 {
            continue; // hinge kink
        }
        let exact = grad(&params, &example);
        let approx = finite_diff_grad(&params, &example, 1e-5);
        let diff: Vec<f64> = exact
            .as_slice()
            .iter()
            .zip(approx.as_slice())
            .map(|(a, b)| a - b)
            .collect();
        let scale = max_abs(exact.as_slice());
        let rel = if scale == 0.0 {
            // inactive hinge: both must be exactly zero
            max_abs(&diff)
        } else {
            max_abs(&diff) / scale
        };
        worst = worst.max(rel);
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert!(worst <= 1e-6, "max relative error {worst:.3e} exceeds 1e-6");
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}, budget 5 s");
    println!(
        "PASS criterion 1: gradient exactness, 100 cases, max rel err {worst:.3e} (<= 1e-6), {:.2?}",
        elapsed
    );
}

// ---------------------------------------------------------------------------
// criterion 2: meta-gradient exactness
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_meta_gradient_exactness() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(202);
    let (corpus, index) = random_corpus(&mut rng, 30, 40, 12);

    let alpha = 0.1;
    let eta = 1.0;
    let mut checked = 0;
    let mut worst = 0.0f64;
    while checked < 50 {
        let params = random_params(&mut rng);
        let synth: Vec<PairExample> = (0..4)
            .map(|_| random_example(&mut rng, &corpus, &index))
            .collect();
        let target: Vec<PairExample> = (0..3)
            .map(|_| random_example(&mut rng, &corpus, &index))
            .collect();
        if synth
            .iter()
            .chain(&target)
            .any(|ex| (margin(&params, ex) - 1.0).abs() <= 1e-3)
        {
            continue; // keep clear of hinge kinks
        }
        let raw = meta_backward(&params, &synth, &target, alpha, eta).unwrap();
        let fd = meta_grad_fd(&params, &synth, &target, alpha, 1e-6);
        let scale = max_abs(&raw);
        if scale < 1e-6 {
            continue; // no informative signal at this draw
        }
        // meta_backward returns eta times the negated finite-difference value.
        let diff: Vec<f64> = raw.iter().zip(&fd).map(|(w, f)| w + eta * f).collect();
        let rel = max_abs(&diff) / scale;
        worst = worst.max(rel);
        checked += 1;
    }
    let elapsed = start.elapsed();
    assert!(worst <= 1e-5, "max relative error {worst:.3e} exceeds 1e-5");
    assert!(
        elapsed.as_secs_f64() < 10.0,
        "took {elapsed:?}, budget 10 s"
    );
    println!(
        "PASS criterion 2: meta-gradient exactness, 50 cases, max rel err {worst:.3e} (<= 1e-5), {:.2?}",
        elapsed
    );
}

// ---------------------------------------------------------------------------
// criterion 3: eta elimination
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_eta_elimination() {
    let mut rng = ChaCha20Rng::seed_from_u64(303);
    let (corpus, index) = random_corpus(&mut rng, 30, 40, 12);

    let mut worst = 0.0f64;
    for _ in 0..50 {
        let params = random_params(&mut rng);
        let synth: Vec<PairExample> = (0..8)
            .map(|_| random_example(&mut rng, &corpus, &index))
            .collect();
        let target: Vec<PairExample> = (0..8)
            .map(|_| random_example(&mut rng, &corpus, &index))
            .collect();
        let reference =
            normalize_weights(&meta_backward(&params, &synth, &target, 0.1, 1.0).unwrap());
        for eta in [0.1, 10.0] {
            let other =
                normalize_weights(&meta_backward(&params, &synth, &target, 0.1, eta).unwrap());
            for (a, b) in reference.iter().zip(&other) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(
        worst <= 1e-12,
        "normalized weights differ by {worst:.3e} across eta"
    );
    println!(
        "PASS criterion 3: eta elimination, 50 batches x eta in {{0.1, 1, 10}}, max deviation {worst:.3e} (<= 1e-12)"
    );
}

// ---------------------------------------------------------------------------
// criterion 4: normalization contract
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_normalization_contract() {
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    for case in 0..1000 {
        let n = rng.random_range(1..=32);
        // every third case is all-nonpositive to exercise the delta guard
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if case % 3 == 0 {
                    -rng.random_range(0.0..2.0)
                } else {
                    rng.random_range(-2.0..2.0)
                }
            })
            .collect();
        let w = normalize_weights(&raw);
        assert!(w.iter().all(|&x| x >= 0.0), "negative normalized weight");
        let sum: f64 = w.iter().sum();
        assert!(
            sum == 0.0 || (sum - 1.0).abs() <= 1e-12,
            "sum {sum} outside {{0, 1}}"
        );
        if raw.iter().all(|&x| x <= 0.0) {
            assert!(w.iter().all(|&x| x == 0.0), "delta guard failed");
        }
        // positive-scale invariance
        let c = rng.random_range(0.1..10.0);
        let scaled: Vec<f64> = raw.iter().map(|&x| c * x).collect();
        for (a, b) in w.iter().zip(normalize_weights(&scaled)) {
            assert!((a - b).abs() <= 1e-12, "scale invariance violated");
        }
    }
    println!("PASS criterion 4: normalization contract over 1000 random weight vectors");
}

// ---------------------------------------------------------------------------
// criterion 5: swap negation
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_swap_negation() {
    let mut rng = ChaCha20Rng::seed_from_u64(505);
    let (corpus, index) = random_corpus(&mut rng, 30, 40, 12);

    let mut checked = 0;
    while checked < 50 {
        let params = random_params(&mut rng);
        let example = random_example(&mut rng, &corpus, &index);
        let swapped = PairExample {
            pos: example.neg,
            neg: example.pos,
        };
        // both orientations must sit in the active-hinge region
        if margin(&params, &example).abs() >= 1.0 {
            continue;
        }
        let target: Vec<PairExample> = (0..3)
            .map(|_| random_example(&mut rng, &corpus, &index))
            .collect();
        let w_fwd = meta_backward(&params, &[example], &target, 0.1, 1.0).unwrap()[0];
        let w_rev = meta_backward(&params, &[swapped], &target, 0.1, 1.0).unwrap()[0];
        if w_fwd == 0.0 {
            continue; // orthogonal draw; negation holds trivially but the
                      // clipping assertion needs a signed weight
        }
        assert_eq!(w_rev, -w_fwd, "raw weight must negate exactly under swap");
        let c_fwd = w_fwd.max(0.0);
        let c_rev = w_rev.max(0.0);
        assert!(
            (c_fwd > 0.0) ^ (c_rev > 0.0),
            "exactly one orientation must survive clipping"
        );
        checked += 1;
    }
    println!("PASS criterion 5: swap negation exact on 50 active-hinge triples, one orientation survives clipping");
}

// ---------------------------------------------------------------------------
// criteria 6 and 7 share one benchmark run
// ---------------------------------------------------------------------------

struct BenchOutcome {
    report: NoiseBenchReport,
    elapsed_s: f64,
}

fn bench_outcome() -> &'static BenchOutcome {
    static OUTCOME: OnceLock<BenchOutcome> = OnceLock::new();
    OUTCOME.get_or_init(|| {
        let config = NoiseBenchConfig::default();
        // the pinned experiment shape
        assert_eq!(config.topics, 4);
        assert_eq!(config.docs_per_topic, 50);
        assert_eq!(config.n_queries, 40);
        assert_eq!(config.noise_rate, 0.3);
        assert_eq!(config.steps, 500);
        assert_eq!(config.batch_synth, 8);
        assert_eq!(config.batch_target, 8);
        assert_eq!(config.trials, 5);
        let start = Instant::now();
        let report = run_noise_bench(&config).expect("benchmark runs");
        BenchOutcome {
            report,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_6_noise_robustness() {
    let outcome = bench_outcome();
    let report = &outcome.report;

    let clean = report.mean_weight_clean;
    let flipped = report.mean_weight_flipped;
    assert!(
        clean >= 2.0 * flipped,
        "(a) mean clean weight {clean:.6} < 2 x mean flipped weight {flipped:.6}"
    );
    assert_eq!(
        report.median_weight_flipped, 0.0,
        "(b) median final weight of flipped triples must be zero"
    );
    assert!(
        report.mean_ndcg_gap >= 0.02,
        "(c) ndcg@20 gap {:.5} below 0.02 (meta {:.5}, uniform {:.5})",
        report.mean_ndcg_gap,
        report.mean_ndcg_meta,
        report.mean_ndcg_uniform
    );
    assert!(
        outcome.elapsed_s < 120.0,
        "benchmark took {:.1} s, budget 120 s",
        outcome.elapsed_s
    );
    println!(
        "PASS criterion 6: noise robustness; weights clean {clean:.4} vs flipped {flipped:.4} (ratio >= 2), \
         flipped median 0, ndcg meta {:.5} vs uniform {:.5} (gap {:.5} >= 0.02), {:.1} s (< 120 s)",
        report.mean_ndcg_meta, report.mean_ndcg_uniform, report.mean_ndcg_gap, outcome.elapsed_s
    );
}

#[test]
fn criterion_7_weight_diversity() {
    let report = &bench_outcome().report;
    assert!(
        report.frac_batches_diverse >= 0.5,
        "only {:.3} of batches show within-batch weight spread",
        report.frac_batches_diverse
    );
    println!(
        "PASS criterion 7: weight diversity, {:.3} of logged batches have std > 0 (>= 0.5)",
        report.frac_batches_diverse
    );
}

// ---------------------------------------------------------------------------
// criterion 8: metric oracles
// ---------------------------------------------------------------------------

/// By-definition NDCG: DCG over the list order divided by DCG of all judged
/// grades sorted descending.
fn ndcg_oracle(grades_in_order: &[u32], all_judged: &[u32], k: usize) -> f64 {
    fn dcg(grades: &[u32], k: usize) -> f64 {
        let mut total = 0.0;
        for (i, &g) in grades.iter().take(k).enumerate() {
            total += (2f64.powi(g as i32) - 1.0) / ((i + 2) as f64).log2();
        }
        total
    }
    let mut ideal: Vec<u32> = all_judged.iter().copied().filter(|&g| g > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg = dcg(&ideal, k);
    if idcg == 0.0 {
        0.0
    } else {
        dcg(grades_in_order, k) / idcg
    }
}

/// ERR by stop-event enumeration: for every rank, the probability the user
/// stops there, each product built from scratch.
fn err_oracle(grades_in_order: &[u32], k: usize, g_max: u32) -> f64 {
    let r = |g: u32| (2f64.powi(g as i32) - 1.0) / 2f64.powi(g_max as i32);
    let mut total = 0.0;
    for stop in 0..grades_in_order.len().min(k) {
        let mut p_stop = r(grades_in_order[stop]) / (stop + 1) as f64;
        for earlier in 0..stop {
            p_stop *= 1.0 - r(grades_in_order[earlier]);
        }
        total += p_stop;
    }
    total
}

fn precision_oracle(grades_in_order: &[u32], k: usize) -> f64 {
    grades_in_order.iter().take(k).filter(|&&g| g > 0).count() as f64 / k as f64
}

#[test]
fn criterion_8_metric_oracles() {
    let mut rng = ChaCha20Rng::seed_from_u64(808);
    let mut worst = 0.0f64;
    for case in 0..200 {
        let n_docs = rng.random_range(1..=10);
        let k = rng.random_range(1..=12);
        let mut qrels = Qrels::new();
        let mut run = RunFile::new("oracle");
        let mut grades_in_order = Vec::new();
        let mut all_judged = Vec::new();
        let mut g_max = 1u32;
        for d in 0..n_docs {
            let grade = rng.random_range(0..=4u32);
            let judged = rng.random_bool(0.9);
            let retrieved = rng.random_bool(0.9);
            let doc_id = format!("c{case}d{d}");
            if judged {
                qrels.insert("q", &doc_id, grade as i64);
                all_judged.push(grade);
                g_max = g_max.max(grade);
            }
            if retrieved {
                grades_in_order.push(if judged { grade } else { 0 });
                run.push(
                    "q",
                    RunEntry {
                        doc_id,
                        score: (n_docs - d) as f64,
                        rank: run.entries("q").map_or(0, |e| e.len()) + 1,
                    },
                );
            }
        }
        if run.entries("q").is_none() {
            continue;
        }
        let ndcg = ndcg_at_k(&run, &qrels, k)["q"];
        let err = err_at_k(&run, &qrels, k, g_max).unwrap()["q"];
        let p = precision_at_k(&run, &qrels, k)["q"];
        worst = worst.max((ndcg - ndcg_oracle(&grades_in_order, &all_judged, k)).abs());
        worst = worst.max((err - err_oracle(&grades_in_order, k, g_max)).abs());
        worst = worst.max((p - precision_oracle(&grades_in_order, k)).abs());
    }
    assert!(worst <= 1e-12, "metric oracle deviation {worst:.3e}");

    // worked values: grades [0, 1] at ranks [1, 2] -> NDCG 0.63093;
    // two documents at the top grade (g_max 2) -> ERR 0.84375.
    let mut qrels = Qrels::new();
    qrels.insert("q", "d2", 1);
    let mut run = RunFile::new("w");
    run.push(
        "q",
        RunEntry {
            doc_id: "d1".into(),
            score: 2.0,
            rank: 1,
        },
    );
    run.push(
        "q",
        RunEntry {
            doc_id: "d2".into(),
            score: 1.0,
            rank: 2,
        },
    );
    let ndcg = ndcg_at_k(&run, &qrels, 2)["q"];
    assert!((ndcg - 1.0 / 3f64.log2()).abs() <= 1e-12);
    assert_eq!((ndcg * 1e5).round() / 1e5, 0.63093);

    let mut qrels = Qrels::new();
    qrels.insert("q", "d1", 2);
    qrels.insert("q", "d2", 2);
    let mut run = RunFile::new("w");
    run.push(
        "q",
        RunEntry {
            doc_id: "d1".into(),
            score: 2.0,
            rank: 1,
        },
    );
    run.push(
        "q",
        RunEntry {
            doc_id: "d2".into(),
            score: 1.0,
            rank: 2,
        },
    );
    let err = err_at_k(&run, &qrels, 20, 2).unwrap()["q"];
    assert_eq!(err, 0.84375);

    println!(
        "PASS criterion 8: metric oracles on 200 random instances, max |dev| {worst:.3e} (<= 1e-12); \
         worked values 0.63093 and 0.84375 reproduced"
    );
}

// ---------------------------------------------------------------------------
// criterion 9: retrieval oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_retrieval_oracle() {
    let mut rng = ChaCha20Rng::seed_from_u64(909);
    for case in 0..50 {
        let n_docs = rng.random_range(2..=100);
        let (corpus, index) = random_corpus(&mut rng, n_docs, 30, 15);
        let n_terms = rng.random_range(1..=4);
        let query: Vec<String> = (0..n_terms)
            .map(|_| format!("t{}", rng.random_range(0..30)))
            .collect();

        // independent scalar BM25 over raw token lists
        let k1 = 0.9;
        let b = 0.4;
        let n = corpus.len() as f64;
        let avg: f64 = corpus
            .docs()
            .iter()
            .map(|d| d.tokens.len() as f64)
            .sum::<f64>()
            / n;
        let mut expected: Vec<(String, f64)> = corpus
            .docs()
            .iter()
            .map(|doc| {
                let mut score = 0.0;
                let mut seen = std::collections::BTreeSet::new();
                for term in &query {
                    if !seen.insert(term.clone()) {
                        continue;
                    }
                    let tf = doc.tokens.iter().filter(|t| *t == term).count() as f64;
                    if tf == 0.0 {
                        continue;
                    }
                    let df = corpus
                        .docs()
                        .iter()
                        .filter(|d| d.tokens.iter().any(|t| t == term))
                        .count() as f64;
                    let idf = (1.0 + (n - df + 0.5) / (df + 0.5)).ln();
                    let norm = k1 * (1.0 - b + b * doc.tokens.len() as f64 / avg);
                    score += idf * tf * (k1 + 1.0) / (tf + norm);
                }
                (doc.id.clone(), score)
            })
            .filter(|&(_, s)| s > 0.0)
            .collect();
        expected.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));

        let got = index.search(&query, usize::MAX);
        let got_ids: Vec<&str> = got.iter().map(|(d, _)| d.as_str()).collect();
        let expected_ids: Vec<&str> = expected.iter().map(|(d, _)| d.as_str()).collect();
        assert_eq!(got_ids, expected_ids, "case {case}: ordering mismatch");
        for ((_, s_got), (_, s_exp)) in got.iter().zip(&expected) {
            assert!((s_got - s_exp).abs() <= 1e-9, "case {case}: score drift");
        }
    }
    println!("PASS criterion 9: search ordering equals brute-force BM25 on 50 random corpora (<= 100 docs)");
}

// ---------------------------------------------------------------------------
// criterion 10: reciprocal rank fusion
// ---------------------------------------------------------------------------

#[test]
fn criterion_10_rrf() {
    let mk = |tag: &str, docs: &[&str]| {
        let mut run = RunFile::new(tag);
        for (i, d) in docs.iter().enumerate() {
            run.push(
                "q",
                RunEntry {
                    doc_id: d.to_string(),
                    score: (docs.len() - i) as f64,
                    rank: i + 1,
                },
            );
        }
        run
    };
    // three-run fixture with k = 1
    let a = mk("a", &["d1", "d2", "d3"]);
    let b = mk("b", &["d2", "d1", "d4"]);
    let c = mk("c", &["d1", "d4", "d2"]);
    let fused = rrf(&[a.clone(), b, c], 1.0).unwrap();
    let entries = fused.entries("q").unwrap();
    // d1: 1/2 + 1/3 + 1/2; d2: 1/3 + 1/2 + 1/4; d3: 1/4; d4: 1/4 + 1/3
    let hand = [
        ("d1", 0.5 + 1.0 / 3.0 + 0.5),
        ("d2", 1.0 / 3.0 + 0.5 + 0.25),
        ("d4", 0.25 + 1.0 / 3.0),
        ("d3", 0.25),
    ];
    assert_eq!(entries.len(), hand.len());
    for (entry, (doc, score)) in entries.iter().zip(hand) {
        assert_eq!(entry.doc_id, doc);
        assert!(
            (entry.score - score).abs() <= 1e-12,
            "{doc}: {} vs {score}",
            entry.score
        );
    }

    // self-fusion preserves ordering
    let self_fused = rrf(&[a.clone(), a.clone()], 1.0).unwrap();
    let order: Vec<&str> = self_fused
        .entries("q")
        .unwrap()
        .iter()
        .map(|e| e.doc_id.as_str())
        .collect();
    assert_eq!(order, vec!["d1", "d2", "d3"]);

    println!(
        "PASS criterion 10: RRF k=1 matches hand-computed scores; self-fusion preserves ordering"
    );
}

// ---------------------------------------------------------------------------
// criterion 11: determinism
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_determinism() {
    let config = NoiseBenchConfig {
        topics: 2,
        docs_per_topic: 10,
        n_queries: 8,
        vocab_size: 24,
        doc_len: 20,
        steps: 50,
        folds: 2,
        depth: 20,
        retrieval_k: 20,
        synth_depth: 10,
        trials: 2,
        seed: 7,
        ..NoiseBenchConfig::default()
    };
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    write_noise_bench(&config, dir_a.path()).unwrap();
    write_noise_bench(&config, dir_b.path()).unwrap();

    let mut files_a = collect_files(dir_a.path());
    let mut files_b = collect_files(dir_b.path());
    files_a.sort();
    files_b.sort();
    let rel = |files: &[std::path::PathBuf], root: &std::path::Path| -> Vec<std::path::PathBuf> {
        files
            .iter()
            .map(|f| f.strip_prefix(root).unwrap().to_path_buf())
            .collect()
    };
    assert_eq!(rel(&files_a, dir_a.path()), rel(&files_b, dir_b.path()));
    assert!(!files_a.is_empty());
    for (fa, fb) in files_a.iter().zip(&files_b) {
        let a = std::fs::read(fa).unwrap();
        let b = std::fs::read(fb).unwrap();
        assert_eq!(a, b, "artifact {} differs between runs", fa.display());
    }
    println!(
        "PASS criterion 11: repeated noise-bench runs byte-identical across {} artifacts",
        files_a.len()
    );
}

fn collect_files(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(collect_files(&path));
        } else {
            out.push(path);
        }
    }
    out
}
