#![no_main]

use std::path::Path;

use congestion_bandit_harness::parse_config;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // game file references resolve against a directory that does not exist
    let _ = parse_config(text, Path::new("/nonexistent-fuzz-base"));
});
