#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = profex::gp::read_model(text) {
            // A model that parses must round-trip.
            let again = profex::gp::write_model(&model);
            profex::gp::read_model(&again).expect("written model must parse");
        }
    }
});
