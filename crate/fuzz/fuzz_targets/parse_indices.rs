#![no_main]

use dcp_core::io::parse_indices;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(indices) = parse_indices(text) {
        let rendered: Vec<String> = indices.iter().map(|i| i.to_string()).collect();
        assert_eq!(parse_indices(&rendered.join("\n")).unwrap(), indices);
    }
});
