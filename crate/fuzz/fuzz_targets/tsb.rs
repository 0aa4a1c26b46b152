#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(file) = gridsynth::emit::TsbFile::decode(data) {
        assert_eq!(file.encode().unwrap(), data);
    }
});
