#![no_main]

use levelset::io::{decode_matrix, decode_vector, encode_matrix};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_matrix(data) {
        // Anything accepted must re-encode to the same bytes.
        assert_eq!(encode_matrix(&m), data);
    }
    let _ = decode_vector(data);
});
