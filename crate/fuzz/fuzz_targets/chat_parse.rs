#![no_main]

use audiomt_core::chat::{parse, render};
use audiomt_core::grammar::{default_vocabulary, DEFAULT_LANGUAGES};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let vocab = default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap();
    let tokens: Vec<u32> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect();
    if let Ok(d) = parse(&tokens, &vocab) {
        let (again, _) = render(&d, &vocab);
        assert_eq!(parse(&again, &vocab).unwrap(), d);
    }
});
