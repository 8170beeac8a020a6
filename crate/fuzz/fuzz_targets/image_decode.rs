#![no_main]

use libfuzzer_sys::fuzz_target;

// PNG sniffing, JPEG sniffing and the mask reader share the upload path.
fuzz_target!(|data: &[u8]| {
    let _ = objrestore::io::decode_image(data);
    let _ = objrestore::io::decode_mask_png(data);
});
