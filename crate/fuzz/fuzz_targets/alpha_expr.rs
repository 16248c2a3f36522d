#![no_main]

use libfuzzer_sys::fuzz_target;
use triplei_core::signals::parse_alpha;

// Parsing must never panic, and printing a parsed expression must be a
// fixed point of the parser.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(expr) = parse_alpha(text) {
        let printed = expr.to_string();
        let again = parse_alpha(&printed).expect("printed expressions reparse");
        assert_eq!(expr, again, "print/parse fixed point for `{printed}`");
    }
});
