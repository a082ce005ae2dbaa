#![no_main]

use audiomt_core::chat::Dialogue;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = Dialogue::from_json(text) {
            assert_eq!(Dialogue::from_json(&d.to_json()).unwrap(), d);
        }
    }
});
