#![no_main]
use libfuzzer_sys::fuzz_target;
use spiked::report::{parse_report, recompute_statistic};

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(env) = parse_report(s) {
            let _ = recompute_statistic(&env.body);
            let _ = env.to_json();
        }
    }
});
