#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = holoqa_core::stats::ScoreTable::from_reader(data);
});
