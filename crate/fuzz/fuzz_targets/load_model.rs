#![no_main]

use gridstudies_core::ml::{load_model, save_model};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = load_model(text) {
        load_model(&save_model(&model)).expect("saved model reloads");
    }
});
