#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = homctx::io::parse_pgm(data) {
        assert!(map.values().iter().all(|v| (0.0..=1.0).contains(v)));
        let _ = homctx::geometry::extract_blobs(&map, &Default::default());
    }
});
