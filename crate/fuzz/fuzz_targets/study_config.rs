#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = serde_json::from_slice::<holoqa_session::StudyConfig>(data) {
        let _ = config.validate();
    }
});
