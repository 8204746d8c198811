#![no_main]

use bacta_core::inference::ProbQuery;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let _ = text.parse::<ProbQuery>();
});
