#![no_main]

use bacta_core::design::load_trial_spec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(design) = load_trial_spec(text) {
        let again = load_trial_spec(&design.to_json()).expect("serialized spec reloads");
        assert_eq!(again.to_json(), design.to_json());
    }
});
