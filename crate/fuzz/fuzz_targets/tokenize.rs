#![no_main]

use bacta_core::dsl::tokenize;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|src: &str| {
    if let Ok(tokens) = tokenize(src) {
        for t in tokens {
            assert!(t.span.offset + t.span.length <= src.len());
        }
    }
});
