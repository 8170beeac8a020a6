#![no_main]

use libfuzzer_sys::fuzz_target;
use objrestore::estimate::{estimate_quality_from_bitstream, estimate_quality_from_tables};

fuzz_target!(|data: &[u8]| {
    if let Ok(tables) = objrestore::jpeg::read_quant_tables(data) {
        let _ = estimate_quality_from_tables(&tables);
    }
    let _ = estimate_quality_from_bitstream(data);
});
