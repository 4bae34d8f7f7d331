#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(input) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(checkpoint) = mar::formats::parse_checkpoint(input) {
        if let Some(state) = &checkpoint.adam_state {
            assert_eq!(state.m.len(), checkpoint.params.len());
            assert_eq!(state.v.len(), checkpoint.params.len());
        }
    }
});
