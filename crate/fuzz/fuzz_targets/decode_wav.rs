#![no_main]

use audiomt_core::frontend::{decode_wav, log_mel, resample, SAMPLE_RATE};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(clip) = decode_wav(data) {
        if clip.len() <= 1 << 16 {
            if let Ok(c) = resample(&clip, SAMPLE_RATE) {
                let _ = log_mel(&c);
            }
        }
    }
});
