#![no_main]

use dcp_core::io::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = RunConfig::from_json(text) {
        let json = serde_json::to_string(&cfg).expect("config serializes");
        assert_eq!(RunConfig::from_json(&json).expect("round trip"), cfg);
    }
});
