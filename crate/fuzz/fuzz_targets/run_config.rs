#![no_main]

use libfuzzer_sys::fuzz_target;
use triplei_cli::RunConfig;

// Run configurations come from user-edited TOML; parsing and validation
// must never panic.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = RunConfig::from_str(text) {
        let _ = config.validate();
        let _ = config.hash();
    }
});
