#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(run) = mar::formats::parse_run(input, "fuzz") {
        // accepted runs satisfy the invariants the parser promises
        for (_, entries) in run.iter() {
            for (i, entry) in entries.iter().enumerate() {
                assert_eq!(entry.rank, i + 1);
                if i > 0 {
                    assert!(entries[i - 1].score >= entry.score);
                }
            }
        }
    }
});
