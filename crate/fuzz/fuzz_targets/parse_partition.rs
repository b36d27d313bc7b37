#![no_main]

use dcp_core::io::parse_partition_text;
use dcp_core::Partition;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(p) = text.parse::<Partition>() {
        let again: Partition = p.to_string().parse().expect("display output parses");
        assert_eq!(again, p);
    }
    let _ = parse_partition_text(text);
});
