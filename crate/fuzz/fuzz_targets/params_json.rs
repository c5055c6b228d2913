#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let space = homctx::LabelSpace::synthetic(4, 5, 4).unwrap();
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok((params, meta)) = homctx::io::params_from_str(text, &space) {
            let again = homctx::io::params_to_string(&params, &space, &meta).unwrap();
            assert_eq!(
                homctx::io::params_from_str(&again, &space).unwrap().0,
                params
            );
        }
    }
});
