#![no_main]
use libfuzzer_sys::fuzz_target;
use spiked::spectrum::{parse_csv, Header};

fuzz_target!(|data: &[u8]| {
    for header in [Header::Auto, Header::Present, Header::Absent] {
        let _ = parse_csv(data, header, true);
    }
});
