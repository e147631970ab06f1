#![no_main]

use gridstudies_core::lightning::read_events;
use gridstudies_core::studies::lightning_dataset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_events(data) {
        let _ = lightning_dataset(&rows);
    }
});
