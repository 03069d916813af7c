#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Must never panic or over-allocate on hostile headers.
    let _ = emev::dataset::decode_dataset(data);
});
