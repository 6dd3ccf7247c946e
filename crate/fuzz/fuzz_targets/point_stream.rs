#![no_main]

use libfuzzer_sys::fuzz_target;
use modalnav::perception::parse_point_stream;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(points) = parse_point_stream(text) {
        for p in points {
            assert!(p.variance > 0.0 && p.position.iter().all(|v| v.is_finite()));
        }
    }
});
