#![no_main]

use gridstudies_core::config::StudyConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = StudyConfig::from_toml(text, "fuzz") {
        let again = StudyConfig::from_toml(&cfg.to_toml(), "fuzz").expect("written config reloads");
        assert_eq!(again, cfg);
    }
});
