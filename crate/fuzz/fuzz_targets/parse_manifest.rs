#![no_main]

use audiomt_core::corpus::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = parse_manifest(text) {
            let lines: String = records.iter().map(|r| r.to_json_line() + "\n").collect();
            assert_eq!(parse_manifest(&lines).unwrap(), records);
        }
    }
});
