#![no_main]

use levelset::io::{decode_masked, encode_masked};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(d) = decode_masked(data) {
        assert_eq!(encode_masked(&d), data);
    }
});
