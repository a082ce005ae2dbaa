#![no_main]

use audiomt_core::srwt::TimedTranscript;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(t) = TimedTranscript::from_json(text) {
            assert_eq!(TimedTranscript::from_json(&t.to_json()).unwrap(), t);
        }
    }
});
