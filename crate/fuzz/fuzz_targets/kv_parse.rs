#![no_main]

use libfuzzer_sys::fuzz_target;
use objrestore::estimate::Calibration;
use objrestore::kv::KvDocument;
use objrestore::restore::RestoreConstants;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = KvDocument::parse(text);
    let _ = RestoreConstants::parse(text);
    let _ = Calibration::parse(text);
});
