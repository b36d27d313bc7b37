#![no_main]

use dcp_core::io::parse_trace;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_trace(data) {
        if let Some(first) = rows.first() {
            assert!(rows
                .iter()
                .all(|r| r.partition.len() == first.partition.len()));
        }
    }
});
