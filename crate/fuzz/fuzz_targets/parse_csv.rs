#![no_main]

use dcp_core::io::{parse_csv, CsvOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let with_truth = CsvOptions {
        truth_column: Some("truth".into()),
        ..CsvOptions::default()
    };
    for opts in [CsvOptions::default(), with_truth] {
        let Ok(loaded) = parse_csv(data, &opts) else {
            continue;
        };
        assert!(loaded.expansion.iter().all(|&r| r < loaded.data.len()));
        assert!(loaded.data.len() <= loaded.num_rows());
        if let Some(truth) = &loaded.truth {
            assert_eq!(truth.len(), loaded.num_rows());
        }
        for p in loaded.data.points() {
            assert_eq!(p.len(), loaded.data.dim());
            assert!(p.iter().all(|v| v.is_finite()));
        }
    }
});
