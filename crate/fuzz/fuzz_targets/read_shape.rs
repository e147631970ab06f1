#![no_main]

use gridstudies_core::dist::read_shape;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_shape("fuzz", data);
});
