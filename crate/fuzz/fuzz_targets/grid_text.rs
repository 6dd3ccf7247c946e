#![no_main]

use libfuzzer_sys::fuzz_target;
use modalnav::grid::GridText;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = GridText::parse(text) {
        // Whatever parses must survive its own serialization.
        let again = GridText::parse(&grid.to_string()).expect("canonical text parses");
        assert_eq!(again.meta, grid.meta);
        assert_eq!(again.to_string(), grid.to_string());
    }
});
