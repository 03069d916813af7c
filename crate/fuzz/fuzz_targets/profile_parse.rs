#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Must never panic; malformed tables return Err.
        let _ = emev::channel::parse_profile(text, "<fuzz>");
    }
});
