#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(space) = homctx::LabelSpace::from_toml_str(text) {
            // a parsed space must survive its own serialization
            let again = homctx::LabelSpace::from_toml_str(&space.to_toml_string()).unwrap();
            assert_eq!(again.fingerprint(), space.fingerprint());
        }
    }
});
