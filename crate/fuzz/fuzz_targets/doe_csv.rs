#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(doe) = profex::pipeline::parse_doe(text, None) {
            assert!(doe.x.iter().flatten().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }
});
