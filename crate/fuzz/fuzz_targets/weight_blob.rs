#![no_main]

use libfuzzer_sys::fuzz_target;
use triplei_core::triple_i::WeightPanel;

fuzz_target!(|data: &[u8]| {
    let _ = WeightPanel::read_blob(data);
});
