#![no_main]

use libfuzzer_sys::fuzz_target;
use objrestore::segment::rle::{decode_compact, encode_compact};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(counts) = decode_compact(text) {
        // Accumulated runs can exceed what twelve characters re-encode.
        if counts.iter().all(|&c| c < 1 << 40) {
            assert_eq!(decode_compact(&encode_compact(&counts)).unwrap(), counts);
        }
    }
});
