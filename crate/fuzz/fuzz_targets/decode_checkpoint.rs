#![no_main]

use audiomt_core::model::{decode_checkpoint, encode_checkpoint};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((params, opt)) = decode_checkpoint::<f64>(data) {
        let once = encode_checkpoint(&params, &opt);
        let (p2, o2) = decode_checkpoint::<f64>(&once).expect("re-encoded checkpoint decodes");
        assert_eq!(encode_checkpoint(&p2, &o2), once);
    }
});
