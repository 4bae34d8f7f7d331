#![no_main]

use libfuzzer_sys::fuzz_target;

// The JSONL corpus parser must reject malformed lines with an error and
// never panic; parsed documents keep unique ids and derived tokens.
fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(corpus) = mar::formats::parse_corpus(input, "fuzz") {
        for doc in corpus.docs() {
            assert!(!doc.id.is_empty());
            for token in &doc.tokens {
                assert!(token.chars().all(char::is_alphanumeric));
            }
        }
    }
});
