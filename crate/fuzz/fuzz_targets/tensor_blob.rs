#![no_main]

use libfuzzer_sys::fuzz_target;

// The tensor container (JSON header line + little-endian f32 payload) must
// reject malformed input without panicking or over-allocating.
fuzz_target!(|data: &[u8]| {
    let _ = triplei_core::io::read_tensor(data);
});
