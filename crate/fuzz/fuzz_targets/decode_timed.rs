#![no_main]

use audiomt_core::grammar::{default_vocabulary, DEFAULT_LANGUAGES};
use audiomt_core::srwt::{decode_timed, encode_timed};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let vocab = default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap();
    let tokens: Vec<u32> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect();
    if let Ok(t) = decode_timed(&tokens, &vocab) {
        // Lossy UTF-8 or whitespace inside a word can make re-encoding fail.
        if let Ok(again) = encode_timed(&t, &vocab) {
            assert_eq!(decode_timed(&again, &vocab).unwrap(), t);
        }
    }
});
