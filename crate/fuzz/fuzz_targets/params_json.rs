#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(params) = mar::formats::parse_params(input) {
        // accepted parameter vectors always match their architecture
        assert_eq!(params.len(), params.arch().param_count());
    }
});
