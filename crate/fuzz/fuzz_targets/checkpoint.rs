#![no_main]

use libfuzzer_sys::fuzz_target;

// Split the input into a manifest part and a blob part; the decoder must
// reject inconsistent tensor tables without panicking.
fuzz_target!(|data: &[u8]| {
    if data.len() < 2 {
        return;
    }
    let split = u16::from_le_bytes([data[0], data[1]]) as usize;
    let rest = &data[2..];
    if split > rest.len() {
        return;
    }
    let (json, blob) = rest.split_at(split);
    let _ = triplei_core::nn::checkpoint::decode(json, blob);
});
