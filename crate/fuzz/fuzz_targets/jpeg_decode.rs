#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = objrestore::jpeg::decode(data) {
        assert_eq!(
            d.image.data().len(),
            d.image.width() * d.image.height() * d.image.channels()
        );
    }
});
