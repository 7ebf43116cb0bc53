#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(config) = chares::config::Config::parse(text) {
            // Canonical serialization must parse back to an equal config.
            let round = chares::config::Config::parse(&config.to_text()).unwrap();
            assert_eq!(round, config);
        }
    }
});
