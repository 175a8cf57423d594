#![no_main]

use libfuzzer_sys::fuzz_target;
use maxent_core::config::parse_config;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        // Parsing is a pure function of the text.
        let first = parse_config(text);
        assert_eq!(first, parse_config(text));
    }
});
