#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use modalnav::ScenarioConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let _ = ScenarioConfig::parse(text, Path::new("/fuzz"));
});
