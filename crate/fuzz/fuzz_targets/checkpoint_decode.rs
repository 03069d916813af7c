#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = emev::nn::decode_checkpoint::<f32>(data);
});
