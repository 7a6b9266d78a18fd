#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(image) = holoqa_core::field::decode_pgm(data) {
        assert_eq!(image.pixels.len(), image.width * image.height);
    }
});
