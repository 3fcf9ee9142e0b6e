#![no_main]

use levelset::io::{matrix_from_csv, matrix_to_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if let Ok(m) = matrix_from_csv(text) {
        let again = matrix_from_csv(&matrix_to_csv(&m)).expect("own output parses");
        assert_eq!(again.shape(), m.shape());
        assert!(again
            .iter()
            .zip(m.iter())
            .all(|(a, b)| a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())));
    }
});
