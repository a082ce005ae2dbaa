#![no_main]

use audiomt_core::grammar::Vocabulary;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = Vocabulary::from_file_str(text) {
            assert_eq!(Vocabulary::from_file_str(&v.to_file_string()).unwrap(), v);
        }
    }
});
