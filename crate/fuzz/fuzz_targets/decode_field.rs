#![no_main]

use libfuzzer_sys::fuzz_target;

// sidecar text, a NUL byte, then the payload
fuzz_target!(|data: &[u8]| {
    let split = data.iter().position(|&b| b == 0).unwrap_or(data.len());
    if let Ok(sidecar) = std::str::from_utf8(&data[..split]) {
        let payload = data.get(split + 1..).unwrap_or(&[]);
        let _ = holoqa_core::field::decode_field(sidecar, payload);
    }
});
