#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let space = homctx::LabelSpace::synthetic(4, 5, 4).unwrap();
    if let Ok(records) = homctx::io::parse_frames(data, &space) {
        for r in &records {
            r.validate(space.dims()).unwrap();
        }
    }
});
