#![no_main]

use gridstudies_core::fault_lab::read_dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = read_dataset(data);
});
