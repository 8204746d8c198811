#![no_main]

use std::collections::HashSet;

use bacta_core::dsl::{check_semantics, format_model, free_variables, parse_model};
use bacta_core::graph::{compile, Dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|src: &str| {
    let Ok(ast) = parse_model(src) else { return };
    let text = format_model(&ast);
    let again = parse_model(&text).expect("formatted model parses");
    assert_eq!(again.without_spans().items, ast.without_spans().items);
    let names: HashSet<String> = free_variables(&ast).into_iter().collect();
    let _ = check_semantics(&ast, &names);
    if names.is_empty() {
        let _ = compile(&ast, &Dataset::new());
    }
});
