#![no_main]

use audiomt_core::grammar::{build_header, default_vocabulary, parse_header, DEFAULT_LANGUAGES};
use libfuzzer_sys::fuzz_target;

// Input is read as little-endian u16 token ids; ids past the table are kept.
fuzz_target!(|data: &[u8]| {
    let vocab = default_vocabulary(&DEFAULT_LANGUAGES, 256).unwrap();
    let tokens: Vec<u32> = data.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect();
    if let Ok((header, rest)) = parse_header(&tokens, &vocab) {
        let mut again = build_header(&header, &vocab).expect("parsed header is valid").into_inner();
        again.extend(rest.iter());
        assert_eq!(parse_header(&again, &vocab).unwrap(), (header, rest));
    }
});
