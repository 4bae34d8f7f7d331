#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(qrels) = mar::formats::parse_qrels(input, "fuzz") {
        // grades are clamped non-negative and g_max tracks the maximum
        let mut seen_max = 0;
        for (query_id, judged) in qrels.iter() {
            for (doc_id, &grade) in judged {
                assert_eq!(qrels.grade(query_id, doc_id), grade);
                seen_max = seen_max.max(grade);
            }
        }
        assert_eq!(qrels.g_max(), seen_max);
    }
});
