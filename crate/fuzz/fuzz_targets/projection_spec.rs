#![no_main]

use std::str::FromStr;

use libfuzzer_sys::fuzz_target;
use profex::pipeline::ProjectionSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = ProjectionSpec::from_str(text) {
            let shown = spec.to_string();
            let back = ProjectionSpec::from_str(&shown).expect("display output must parse");
            assert_eq!(back.to_string(), shown);
            let _ = spec.to_projection(5);
        }
    }
});
