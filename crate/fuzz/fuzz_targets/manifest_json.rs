#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = homctx::io::Manifest::parse(text) {
            let again = homctx::io::Manifest::parse(&m.to_string_pretty().unwrap()).unwrap();
            assert_eq!(again, m);
        }
    }
});
