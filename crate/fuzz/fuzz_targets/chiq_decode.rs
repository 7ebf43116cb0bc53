#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Decoding must be total: no panics, no unbounded allocation. A valid
    // buffer must survive the encode round trip bit for bit.
    if let Ok(buffer) = chares::iqfile::decode(data) {
        let encoded = chares::iqfile::encode(&buffer);
        assert_eq!(encoded, data);
    }
});
