#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((_, intact)) = holoqa_session::parse_journal(data, std::path::Path::new("journal.jsonl")) {
        assert!(intact <= data.len());
    }
});
