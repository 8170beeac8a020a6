#![no_main]

use libfuzzer_sys::fuzz_target;
use objrestore::segment::parse_external_response;

fuzz_target!(|data: &[u8]| {
    if let Ok((mask, score)) = parse_external_response(data, 40, 30) {
        assert_eq!((mask.width(), mask.height()), (40, 30));
        assert!((0.0..=1.0).contains(&score));
    }
});
