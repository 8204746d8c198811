#![no_main]

use bacta_core::graph::Dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|bytes: &[u8]| {
    if let Ok(d) = Dataset::from_csv_reader(bytes) {
        let mut out = Vec::new();
        d.write_csv(&mut out).expect("in-memory write");
        let back = Dataset::from_csv_reader(out.as_slice()).expect("written csv reads back");
        assert_eq!(back.row_count(), d.row_count());
    }
});
