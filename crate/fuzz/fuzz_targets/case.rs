#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(case) = gridsynth::grid::GridCase::from_toml_str(text) {
            let again = gridsynth::grid::GridCase::from_toml_str(&case.to_toml_string().unwrap()).unwrap();
            assert_eq!(again, case);
        }
    }
});
