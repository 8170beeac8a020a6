#![no_main]

use libfuzzer_sys::fuzz_target;
use objrestore::compose::Project;

fuzz_target!(|data: &[u8]| {
    let _ = Project::from_zip(data);
});
