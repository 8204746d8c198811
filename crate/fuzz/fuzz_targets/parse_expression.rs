#![no_main]

use bacta_core::dsl::{format_expression, parse_expression};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|src: &str| {
    if let Ok(e) = parse_expression(src) {
        let back = parse_expression(&format_expression(&e)).expect("formatted expression parses");
        assert_eq!(back.without_spans(), e.without_spans());
    }
});
