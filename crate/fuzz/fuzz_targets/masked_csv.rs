#![no_main]

use levelset::io::{masked_from_csv, masked_to_csv};
use libfuzzer_sys::fuzz_target;

// Input is the observation CSV and the dims sidecar separated by a NUL byte.
fuzz_target!(|text: &str| {
    let (body, dims) = text.split_once('\0').unwrap_or((text, "n,m\n4,4\n"));
    if let Ok(d) = masked_from_csv(body, dims) {
        let (body, dims) = masked_to_csv(&d);
        let again = masked_from_csv(&body, &dims).expect("own output parses");
        assert_eq!(again.dims(), d.dims());
        assert_eq!(again.indices(), d.indices());
    }
});
