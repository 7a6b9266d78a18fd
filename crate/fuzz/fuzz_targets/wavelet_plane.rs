#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if holoqa_core::codec::Header::parse(data).is_ok() {
        if let Ok(plane) = holoqa_core::codec::decode_plane(data) {
            assert_eq!(plane.pixels.len(), plane.width * plane.height);
        }
    }
});
