#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(triples) = mar::formats::parse_triples(input, "fuzz") {
        for t in &triples {
            assert_ne!(t.pos_doc_id, t.neg_doc_id);
        }
    }
});
