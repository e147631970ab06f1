#![no_main]

use gridstudies_core::dist::read_random_loads;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let names = ["Load1".to_string(), "Load2".into(), "Load3".into()];
    if let Ok(draws) = read_random_loads(&names, data) {
        assert!(draws.iter().all(|d| d.load_kw.len() == names.len()));
    }
});
