#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = chares::nn::checkpoint::decode(data) {
        let encoded = chares::nn::checkpoint::encode(&net);
        assert_eq!(encoded, data);
    }
});
