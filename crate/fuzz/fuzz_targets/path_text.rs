#![no_main]

use libfuzzer_sys::fuzz_target;
use modalnav::ModalPath;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(path) = ModalPath::parse_text(text) {
        let again = ModalPath::parse_text(&path.to_text()).expect("canonical text parses");
        assert_eq!(again.waypoints.len(), path.waypoints.len());
        let _ = path.to_json();
    }
});
