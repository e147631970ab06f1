#![no_main]

use gridstudies_core::phasor::{parse_network, solve_steady_state};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(net) = parse_network(text) {
        // a parsed network may still be singular, but must not panic
        let _ = solve_steady_state(&net);
    }
});
